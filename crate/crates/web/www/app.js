import init, { optimizer_paths, trigger_trace, grad_norm_qq } from "./pkg/aesam_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = { erm: "#d62728", sam: "#1f77b4", "ae-sam": "#2ca02c" };

function report(id, fn) {
  try {
    fn();
  } catch (e) {
    $(id).innerHTML = `<span class="err">${e}</span>`;
  }
}

// Optimizer paths.

let start = [3.0, -2.5];

function drawPaths() {
  const data = JSON.parse(optimizer_paths(
    num("p-amp"), num("p-freq"), start[0], start[1], num("p-eta"), num("p-rho"),
    num("p-noise"), num("p-steps"), num("p-seed")));
  const c = $("paths");
  const g = c.getContext("2d");
  const n = data.grid;
  const cell = c.width / n;
  const lo = Math.min(...data.values);
  const hi = Math.max(...data.values);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      const t = Math.sqrt((data.values[i * n + j] - lo) / (hi - lo || 1));
      const shade = Math.round(255 - 150 * t);
      g.fillStyle = `rgb(${shade},${shade},${Math.min(255, shade + 25)})`;
      g.fillRect(j * cell, i * cell, cell + 1, cell + 1);
    }
  }
  const px = ([x, y]) => [
    (x + data.extent) / (2 * data.extent) * c.width,
    (data.extent - y) / (2 * data.extent) * c.height,
  ];
  const lines = [];
  for (const p of data.paths) {
    g.strokeStyle = COLORS[p.algorithm];
    g.lineWidth = 2;
    g.beginPath();
    p.points.forEach((pt, k) => (k ? g.lineTo(...px(pt)) : g.moveTo(...px(pt))));
    g.stroke();
    if (p.algorithm === "ae-sam") {
      g.fillStyle = COLORS[p.algorithm];
      p.sam_steps.forEach((s, k) => {
        if (!s) return;
        const [x, y] = px(p.points[k]);
        g.beginPath();
        g.arc(x, y, 3, 0, 2 * Math.PI);
        g.fill();
      });
    }
    const used = p.sam_steps.filter(Boolean).length;
    lines.push(`${p.algorithm}: final loss ${p.final_loss.toFixed(4)}, SAM steps ${used}/${p.sam_steps.length}`);
  }
  $("paths-out").innerHTML = lines.join("<br>") + `<br>smoothness beta = ${data.beta.toFixed(3)}`;
}

$("paths").addEventListener("click", (ev) => {
  const c = $("paths");
  const r = c.getBoundingClientRect();
  const ext = 4.0;
  start = [
    ((ev.clientX - r.left) / r.width) * 2 * ext - ext,
    ext - ((ev.clientY - r.top) / r.height) * 2 * ext,
  ];
  report("paths-out", drawPaths);
});

// Trigger trace.

function drawTrigger() {
  const d = JSON.parse(trigger_trace(
    num("t-l1"), num("t-l2"), num("t-delta"), num("t-jitter"), num("t-steps"), num("t-seed")));
  const c = $("trigger");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const T = d.g2.length;
  const top = Math.max(...d.g2, ...d.threshold) * 1.05;
  const bottom = Math.min(0, ...d.threshold);
  const x = (t) => (t / Math.max(1, T - 1)) * (c.width - 10) + 5;
  const y = (v) => c.height - 12 - ((v - bottom) / (top - bottom)) * (c.height - 20);
  const line = (vals, color) => {
    g.strokeStyle = color;
    g.lineWidth = 1.5;
    g.beginPath();
    vals.forEach((v, t) => (t ? g.lineTo(x(t), y(v)) : g.moveTo(x(t), y(v))));
    g.stroke();
  };
  line(d.g2, "#bbb");
  line(d.mu, "#1f77b4");
  line(d.threshold, "#ff7f0e");
  g.fillStyle = "#2ca02c";
  d.sam.forEach((s, t) => s && g.fillRect(x(t) - 1, c.height - 8, 2, 8));
  $("trigger-out").textContent = `%SAM = ${d.percent_sam.toFixed(1)}`;
}

// Q-Q plot.

function drawQq() {
  const d = JSON.parse(grad_norm_qq(num("q-b"), num("q-n"), $("q-relu").checked, num("q-seed")));
  const c = $("qq");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const all = d.theoretical.concat(d.sample);
  const lim = Math.max(...all.map(Math.abs)) * 1.05;
  const p = (v) => ((v + lim) / (2 * lim)) * c.width;
  g.strokeStyle = "#999";
  g.beginPath();
  g.moveTo(p(-lim), c.height - p(-lim));
  g.lineTo(p(lim), c.height - p(lim));
  g.stroke();
  g.fillStyle = "#1f77b4";
  d.theoretical.forEach((t, i) => {
    g.beginPath();
    g.arc(p(t), c.height - p(d.sample[i]), 2.5, 0, 2 * Math.PI);
    g.fill();
  });
  $("qq-out").textContent = `Pearson r = ${d.correlation.toFixed(4)} over ${d.norms.length} batches`;
}

await init();
for (const id of ["p-amp", "p-freq", "p-eta", "p-rho", "p-noise", "p-steps", "p-seed"]) {
  $(id).addEventListener("change", () => report("paths-out", drawPaths));
}
for (const id of ["t-l1", "t-l2", "t-delta", "t-jitter", "t-steps", "t-seed"]) {
  $(id).addEventListener("input", () => report("trigger-out", drawTrigger));
}
$("q-run").addEventListener("click", () => report("qq-out", drawQq));
report("paths-out", drawPaths);
report("trigger-out", drawTrigger);
report("qq-out", drawQq);
