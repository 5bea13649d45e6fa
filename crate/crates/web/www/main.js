import init, { limits, rateSurface, simulate } from "./pkg/exhaust_web.js";

const $ = (id) => document.getElementById(id);
const law = () => $("law").value.trim();
const PAD = 36;

function fail(e) {
  $("status").textContent = String(e);
  $("status").className = "err";
}

function ok() {
  $("status").textContent = "";
  $("status").className = "note";
}

function showLimits() {
  try {
    const v = JSON.parse(limits(law()));
    const rows = ["mean", "variance", "theta", "p", "survival_prob", "sigma_tau_sq", "sigma_p_sq", "epsilon"];
    $("limits-out").innerHTML = rows
      .map((k) => {
        const x = v[k];
        const shown = v[k + "_infinite"] ? "∞" : x === null ? "undefined" : x.toPrecision(8);
        return `<tr><td>${k}</td><td>${shown}</td></tr>`;
      })
      .join("");
    ok();
    return v;
  } catch (e) {
    fail(e);
  }
}

function axes(ctx, w, h, xMax, yMax, xLabel, yLabel) {
  ctx.strokeStyle = "#444";
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.beginPath();
  ctx.moveTo(PAD, 4);
  ctx.lineTo(PAD, h - PAD);
  ctx.lineTo(w - 4, h - PAD);
  ctx.stroke();
  ctx.fillText("0", PAD - 10, h - PAD + 12);
  ctx.fillText(xMax.toFixed(2), w - 30, h - PAD + 12);
  ctx.fillText(yMax.toFixed(2), 2, 12);
  ctx.fillText(xLabel, w / 2, h - 8);
  ctx.save();
  ctx.translate(10, h / 2);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(yLabel, 0, 0);
  ctx.restore();
}

function cross(ctx, x, y, color) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x - 6, y - 6);
  ctx.lineTo(x + 6, y + 6);
  ctx.moveTo(x + 6, y - 6);
  ctx.lineTo(x - 6, y + 6);
  ctx.stroke();
  ctx.lineWidth = 1;
}

function drawSurface() {
  let s, lim;
  try {
    s = JSON.parse(rateSurface(law(), Number($("surf-points").value), Number($("surf-tmax").value)));
    lim = JSON.parse(limits(law()));
    ok();
  } catch (e) {
    return fail(e);
  }
  const c = $("surf");
  const ctx = c.getContext("2d");
  const w = c.width - PAD - 4;
  const h = c.height - PAD - 4;
  ctx.clearRect(0, 0, c.width, c.height);
  const m = s.r.length;
  const finite = s.f.flat().filter((x) => x !== null);
  // Square-root scale so the valley around the zeros stays visible.
  const top = Math.sqrt(Math.max(...finite)) || 1;
  const cw = w / m;
  const ch = h / s.t.length;
  s.f.forEach((row, i) =>
    row.forEach((f, j) => {
      if (f === null) {
        ctx.fillStyle = "#ccc";
      } else {
        const g = Math.round(255 * Math.sqrt(f) / top);
        ctx.fillStyle = `rgb(${g},${g},255)`;
      }
      ctx.fillRect(PAD + i * cw, 4 + h - (j + 1) * ch, cw + 0.5, ch + 0.5);
    })
  );
  axes(ctx, c.width, c.height, 1, s.t[s.t.length - 1], "r", "t");
  const tMax = s.t[s.t.length - 1];
  cross(ctx, PAD, 4 + h, "#d00");
  if (lim.theta !== null && lim.theta <= tMax) cross(ctx, PAD + lim.p * w, 4 + h - (lim.theta / tMax) * h, "#d00");
}

function drawSim() {
  let v;
  try {
    v = JSON.parse(simulate(law(), Number($("sim-n").value), Number($("sim-reps").value), Number($("sim-seed").value)));
    ok();
  } catch (e) {
    return fail(e);
  }
  const c = $("sim");
  const ctx = c.getContext("2d");
  const w = c.width - PAD - 4;
  const h = c.height - PAD - 4;
  ctx.clearRect(0, 0, c.width, c.height);
  const yMax = Math.max(1, ...v.points.map((p) => p[1])) * 1.05;
  axes(ctx, c.width, c.height, 1, yMax, "N(τ)/n", "τ/n");
  ctx.fillStyle = "rgba(20, 60, 200, 0.35)";
  for (const [x, y] of v.points) {
    ctx.beginPath();
    ctx.arc(PAD + x * w, 4 + h - (y / yMax) * h, 2.5, 0, 2 * Math.PI);
    ctx.fill();
  }
  if (v.theta !== null && v.theta <= yMax) cross(ctx, PAD + v.p * w, 4 + h - (v.theta / yMax) * h, "#d00");
  const th = v.theta === null ? "∞" : v.theta.toFixed(4);
  $("sim-summary").textContent =
    `${v.reps} runs at n = ${v.n}: full transmission in ${(100 * v.full_transmission).toFixed(1)}% ` +
    `(tree survival ${(100 * v.survival).toFixed(1)}%). Cross: (p, θ) = (${v.p.toFixed(4)}, ${th}).`;
}

await init();
$("status").textContent = "";
$("limits-go").onclick = showLimits;
$("surf-go").onclick = drawSurface;
$("sim-go").onclick = drawSim;
showLimits();
