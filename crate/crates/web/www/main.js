import init, { optimize, guidelines, sweep } from "./pkg/pushpull_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

function run(outId, fn) {
  const out = $(outId);
  out.classList.remove("err");
  try {
    fn(out);
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

// series: [{ label, color, xs, ys }], marks: x positions drawn as dashed lines
function plot(canvas, series, { xLabel, yLabel, yMax, bars = false, marks = [] }) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 45;
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap((s) => s.xs);
  const xMin = bars ? Math.min(...xs) - 0.5 : 0;
  const xMax = bars ? Math.max(...xs) + 0.5 : Math.max(...xs);
  const top = yMax ?? Math.max(...series.flatMap((s) => s.ys)) * 1.05;
  const X = (x) => pad + ((x - xMin) / (xMax - xMin)) * (w - 2 * pad);
  const Y = (y) => h - pad + (-y / top) * (h - 2 * pad);

  ctx.strokeStyle = "#000";
  ctx.fillStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(pad, pad / 2);
  ctx.lineTo(pad, h - pad);
  ctx.lineTo(w - pad / 2, h - pad);
  ctx.stroke();
  ctx.font = "12px sans-serif";
  ctx.fillText(xLabel, w / 2, h - 8);
  ctx.fillText(yLabel, 4, pad / 2 - 6);
  for (let i = 0; i <= 4; i++) {
    const y = (top * i) / 4;
    ctx.fillText(y.toPrecision(3), 2, Y(y) + 4);
    const x = xMin + ((xMax - xMin) * i) / 4;
    ctx.fillText(bars ? "" : x.toFixed(0), X(x) - 10, h - pad + 14);
  }

  series.forEach((s, i) => {
    ctx.strokeStyle = ctx.fillStyle = s.color ?? COLORS[i % COLORS.length];
    if (bars) {
      const bw = ((w - 2 * pad) / (xMax - xMin)) * 0.8;
      s.xs.forEach((x, j) => {
        ctx.fillRect(X(x) - bw / 2, Y(s.ys[j]), bw, Y(0) - Y(s.ys[j]));
        ctx.fillStyle = "#000";
        ctx.fillText(String(x), X(x) - 5, h - pad + 14);
        ctx.fillStyle = s.color;
      });
    } else {
      ctx.beginPath();
      s.xs.forEach((x, j) => (j ? ctx.lineTo(X(x), Y(s.ys[j])) : ctx.moveTo(X(x), Y(s.ys[j]))));
      ctx.stroke();
    }
    ctx.fillText(s.label, w - pad - 140, pad / 2 + 14 * (i + 1));
  });

  ctx.strokeStyle = "#555";
  ctx.setLineDash([4, 4]);
  for (const m of marks) {
    ctx.beginPath();
    ctx.moveTo(X(m), pad / 2);
    ctx.lineTo(X(m), h - pad);
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function doOptimize() {
  run("opt-out", (out) => {
    const v = JSON.parse(optimize($("frame").value, num("opt-lq"), num("opt-lp")));
    const r = v.result;
    out.textContent =
      `q* = ${r.q_star}, weighted success ${r.p_s_at_star.toFixed(6)}` +
      ` (w_q = ${r.weights.w_q.toFixed(3)}, frame ${(v.frame_duration * 1e3).toFixed(2)} ms)`;
    const rows = r.per_q_table;
    plot($("opt-plot"), [
      {
        label: "weighted success",
        color: "#1f77b4",
        xs: rows.map((x) => x.q),
        ys: rows.map((x) => x.p_s_weighted),
      },
    ], { xLabel: "q", yLabel: "P_s", yMax: 1, bars: true });
  });
}

function doGuidelines() {
  run("gl-out", (out) => {
    const pth = $("gl-pth").value.split(",").map(Number);
    const tables = JSON.parse(guidelines($("frame").value, pth));
    const series = tables.flatMap((t, i) => [
      {
        label: `λq max, P_th=${t.p_th}`,
        color: COLORS[i % COLORS.length],
        xs: t.rows.map((r) => r.q),
        ys: t.rows.map((r) => r.lambda_q_max),
      },
      {
        label: `λp max, P_th=${t.p_th}`,
        color: COLORS[i % COLORS.length],
        xs: t.rows.map((r) => r.q),
        ys: t.rows.map((r) => r.lambda_p_max),
      },
    ]);
    out.textContent = tables
      .map((t) => {
        const r = t.rows[1] ?? t.rows[0];
        return `P_th=${t.p_th}: q=${r.q} λq ≤ ${r.lambda_q_max.toFixed(2)}, λp ≤ ${r.lambda_p_max.toFixed(1)}`;
      })
      .join("\n");
    plot($("gl-plot"), series, { xLabel: "q", yLabel: "max rate [1/s]" });
  });
}

function doSweep() {
  run("sw-out", (out) => {
    const v = JSON.parse(
      sweep($("frame").value, num("sw-lo"), num("sw-hi"), num("sw-ratio"), num("sw-max"), 200),
    );
    out.textContent = v.crossings.length
      ? `curves cross at λp = ${v.crossings.map((x) => x.toFixed(1)).join(", ")}`
      : "no crossing in range";
    plot($("sw-plot"), [
      { label: `q = ${v.low.q}`, xs: v.lambda_p, ys: v.low.p_s_weighted },
      { label: `q = ${v.high.q}`, xs: v.lambda_p, ys: v.high.p_s_weighted },
    ], { xLabel: "λp [1/s]", yLabel: "P_s", yMax: 1, marks: v.crossings });
  });
}

await init();
$("opt-run").onclick = doOptimize;
$("gl-run").onclick = doGuidelines;
$("sw-run").onclick = doSweep;
doOptimize();
doGuidelines();
doSweep();
