import init, { fuse, density_image, sweep_point, kl_divergences } from "./pkg/sle_web.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => x.toFixed(3);

let annotators = [
  { label: 0, confidence: 0.9, reliability: 0.95 },
  { label: 0, confidence: 0.6, reliability: 0.8 },
  { label: 1, confidence: 0.7, reliability: 0.4 },
];
let fusedAlpha = [1, 1, 1];
let targetAlpha = [1, 1, 1];
let predAlpha = [2, 2, 2];

function paint(canvas, alpha) {
  const size = canvas.width;
  const pixels = density_image(new Float64Array(alpha), size);
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, size, size);
  ctx.putImageData(new ImageData(new Uint8ClampedArray(pixels), size, size), 0, 0);
}

function table(head, rows) {
  const th = head.map((h) => `<th>${h}</th>`).join("");
  const body = rows.map((r) => `<tr>${r.map((c) => `<td>${c}</td>`).join("")}</tr>`).join("");
  return `<table><tr>${th}</tr>${body}</table>`;
}

function renderAnnotators() {
  const box = $("annotators");
  box.innerHTML = "";
  annotators.forEach((a, i) => {
    const row = document.createElement("div");
    row.className = "annot";
    row.innerHTML = `
      <select>${[0, 1, 2].map((k) => `<option value="${k}"${k === a.label ? " selected" : ""}>class ${k}</option>`).join("")}</select>
      <label>confidence ${fmt(a.confidence)}<br><input type="range" min="0" max="1" step="0.01" value="${a.confidence}"></label>
      <label>reliability ${fmt(a.reliability)}<br><input type="range" min="0" max="1" step="0.01" value="${a.reliability}"></label>
      <button title="remove">&times;</button>`;
    const [select, conf, rel] = row.querySelectorAll("select, input");
    select.onchange = () => { a.label = Number(select.value); update(); };
    conf.oninput = () => { a.confidence = Number(conf.value); conf.parentElement.firstChild.textContent = `confidence ${fmt(a.confidence)}`; update(); };
    rel.oninput = () => { a.reliability = Number(rel.value); rel.parentElement.firstChild.textContent = `reliability ${fmt(a.reliability)}`; update(); };
    row.querySelector("button").onclick = () => { annotators.splice(i, 1); renderAnnotators(); update(); };
    box.appendChild(row);
  });
}

function update() {
  $("fusion-error").textContent = "";
  try {
    const out = JSON.parse(fuse(JSON.stringify(annotators), Number($("epsilon").value)));
    const rows = out.annotators.map((o, i) => [`annotator ${i}`, ...o.belief.map(fmt), fmt(o.uncertainty), ...o.projected.map(fmt)]);
    rows.push(["<b>fused</b>", ...out.fused.belief.map(fmt), fmt(out.fused.uncertainty), ...out.fused.projected.map(fmt)]);
    rows.push(["soft vote", "", "", "", "", ...out.soft_vote.map(fmt)]);
    $("fusion-table").innerHTML =
      table(["", "b0", "b1", "b2", "u", "P0", "P1", "P2"], rows) +
      `<div class="muted">fused &alpha; = (${out.fused.alpha.map((x) => x.toPrecision(4)).join(", ")})</div>`;
    fusedAlpha = out.fused.alpha;
    paint($("fused-density"), fusedAlpha);
  } catch (e) {
    $("fusion-error").textContent = String(e.message ?? e);
    $("fusion-table").innerHTML = "";
    $("fused-density").getContext("2d").clearRect(0, 0, 240, 240);
  }
}

function runSweep() {
  $("sweep-error").textContent = "";
  $("sweep-table").innerHTML = "running...";
  setTimeout(() => {
    try {
      const out = JSON.parse(sweep_point($("scenario").value, Number($("point").value), Number($("runs").value), Number($("seed").value)));
      const bestJsd = Math.min(...out.scores.map((s) => s.jsd));
      const rows = out.scores.map((s) => [
        s.method, s.filtered ? "filtered" : "all", fmt(s.f1),
        s.jsd === bestJsd ? `<span class="best">${fmt(s.jsd)}</span>` : fmt(s.jsd), fmt(s.nes),
      ]);
      $("sweep-table").innerHTML =
        `<div class="muted">${out.label}: confidence Beta(${out.confidence_beta.join(", ")}), reliability Beta(${out.reliability_beta.join(", ")}), mean of ${out.runs} runs</div>` +
        table(["method", "variant", "F1", "JSD", "NES"], rows);
    } catch (e) {
      $("sweep-error").textContent = String(e.message ?? e);
      $("sweep-table").innerHTML = "";
    }
  }, 10);
}

function renderPredSliders() {
  const box = $("pred-sliders");
  box.innerHTML = "";
  predAlpha.forEach((v, k) => {
    const label = document.createElement("label");
    label.innerHTML = `predicted &alpha;${k} <span>${v.toFixed(2)}</span><br><input type="range" min="-1" max="3" step="0.01" value="${Math.log10(v)}"><br>`;
    const input = label.querySelector("input");
    input.oninput = () => {
      predAlpha[k] = 10 ** Number(input.value);
      label.querySelector("span").textContent = predAlpha[k].toFixed(2);
      updateKl();
    };
    box.appendChild(label);
  });
}

function updateKl() {
  $("kl-error").textContent = "";
  try {
    const [forward, reverse] = kl_divergences(new Float64Array(targetAlpha), new Float64Array(predAlpha));
    $("kl-values").innerHTML = table(["divergence", "value"], [
      ["forward KL(target || predicted)", forward.toPrecision(5)],
      ["reverse KL(predicted || target)", reverse.toPrecision(5)],
    ]) + `<div class="muted">target &alpha; = (${targetAlpha.map((x) => x.toPrecision(4)).join(", ")})</div>`;
    paint($("target-density"), targetAlpha);
    paint($("pred-density"), predAlpha);
  } catch (e) {
    $("kl-error").textContent = String(e.message ?? e);
  }
}

await init();
renderAnnotators();
update();
targetAlpha = fusedAlpha.slice();
renderPredSliders();
updateKl();

$("add").onclick = () => { annotators.push({ label: 2, confidence: 0.8, reliability: 0.8 }); renderAnnotators(); update(); };
$("epsilon").oninput = update;
$("run-sweep").onclick = runSweep;
$("use-fused").onclick = () => { targetAlpha = fusedAlpha.slice(); updateKl(); };
