import init, { simulateStroke, bodeSweep, gripperPose } from "./pkg/gripscribe_demo.js";

const $ = (id) => document.getElementById(id);

function fit(ctx, series, pad) {
  let [x0, y0, x1, y1] = [Infinity, Infinity, -Infinity, -Infinity];
  for (const s of series) for (const [x, y] of s) {
    x0 = Math.min(x0, x); x1 = Math.max(x1, x);
    y0 = Math.min(y0, y); y1 = Math.max(y1, y);
  }
  const { width: w, height: h } = ctx.canvas;
  const k = Math.min((w - 2 * pad) / (x1 - x0 || 1), (h - 2 * pad) / (y1 - y0 || 1));
  const cx = (x0 + x1) / 2, cy = (y0 + y1) / 2;
  return ([x, y]) => [w / 2 + (x - cx) * k, h / 2 - (y - cy) * k];
}

function polyline(ctx, pts, map, color, width) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  pts.forEach((p, i) => {
    const [u, v] = map(p);
    i ? ctx.lineTo(u, v) : ctx.moveTo(u, v);
  });
  ctx.stroke();
}

function clear(ctx) {
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

function damping() {
  return 10 ** Number($("b").value);
}

function drawStroke() {
  const ctx = $("stroke").getContext("2d");
  clear(ctx);
  try {
    const s = JSON.parse(simulateStroke(damping(), Number($("amp").value), Number($("hz").value), $("intent").value));
    const map = fit(ctx, [s.raw, s.pen, s.intent], 20);
    polyline(ctx, s.raw, map, "#e08a5c", 1);
    polyline(ctx, s.intent, map, "#999", 1);
    polyline(ctx, s.pen, map, "#08306b", 1.6);
    $("stroke-stats").className = "";
    $("stroke-stats").textContent =
      `RMS error from intent: hand ${s.raw_rmse_mm.toFixed(2)} mm, pen ${s.pen_rmse_mm.toFixed(2)} mm`;
  } catch (e) {
    $("stroke-stats").className = "err";
    $("stroke-stats").textContent = String(e);
  }
}

function drawBode() {
  const ctx = $("bode").getContext("2d");
  clear(ctx);
  const pts = JSON.parse(bodeSweep(damping()));
  const { width: w, height: h } = ctx.canvas;
  const pad = 40;
  const lf = (f) => Math.log10(f);
  const [f0, f1] = [lf(pts[0].frequency), lf(pts[pts.length - 1].frequency)];
  const X = (f) => pad + ((lf(f) - f0) / (f1 - f0)) * (w - 2 * pad);
  const Y = (g) => h - pad - (g / 1.2) * (h - 2 * pad);
  ctx.fillStyle = "#555";
  ctx.strokeStyle = "#ddd";
  ctx.lineWidth = 1;
  for (const g of [0, 0.25, 0.5, 0.75, 1]) {
    ctx.beginPath(); ctx.moveTo(pad, Y(g)); ctx.lineTo(w - pad, Y(g)); ctx.stroke();
    ctx.fillText(g.toFixed(2), 5, Y(g) + 4);
  }
  for (const p of pts) ctx.fillText(`${p.frequency} Hz`, X(p.frequency) - 14, h - 15);
  polyline(ctx, pts.map((p) => [p.frequency, p.gain]), ([f, g]) => [X(f), Y(g)], "#08306b", 2);
  ctx.fillStyle = "#08306b";
  for (const p of pts) {
    ctx.beginPath(); ctx.arc(X(p.frequency), Y(p.gain), 3, 0, 2 * Math.PI); ctx.fill();
  }
}

function drawGrip() {
  const ctx = $("grip").getContext("2d");
  clear(ctx);
  const d = Number($("d").value);
  try {
    const g = JSON.parse(gripperPose(d));
    const right = g.finger;
    const left = right.map(([x, y]) => [-x, y]);
    const [, , nut, tip] = right;
    const map = fit(ctx, [right, left, [[0, 8], [0, 8]]], 30);
    for (const f of [right, left]) {
      const [p, a, n, t] = f;
      polyline(ctx, [p, a], map, "#333", 3);
      polyline(ctx, [p, t], map, "#333", 3);
      polyline(ctx, [a, n], map, "#1f77b4", 2);
    }
    polyline(ctx, [[0, 8], nut], map, "#888", 4);
    const [cx, cy] = map([0, tip[1]]);
    const [rx] = map([d / 2, 0]);
    ctx.strokeStyle = "#c33";
    ctx.beginPath(); ctx.arc(cx, cy, Math.abs(rx - map([0, 0])[0]), 0, 2 * Math.PI); ctx.stroke();
    $("grip-stats").className = "";
    $("grip-stats").textContent =
      `screw travel ${g.travel.toFixed(2)} mm (${g.turns.toFixed(2)} turns), finger angle ${g.alpha_deg.toFixed(1)}°`;
  } catch (e) {
    $("grip-stats").className = "err";
    $("grip-stats").textContent = String(e);
  }
}

function labels() {
  $("b-out").textContent = damping().toFixed(3);
  $("amp-out").textContent = $("amp").value;
  $("hz-out").textContent = $("hz").value;
  $("d-out").textContent = $("d").value;
}

await init();
labels();
drawStroke();
drawBode();
drawGrip();

for (const id of ["amp", "hz", "intent"]) $(id).addEventListener("change", () => { labels(); drawStroke(); });
for (const id of ["amp", "hz", "d"]) $(id).addEventListener("input", labels);
$("b").addEventListener("input", labels);
$("b").addEventListener("change", () => { drawStroke(); drawBode(); });
$("d").addEventListener("input", drawGrip);
