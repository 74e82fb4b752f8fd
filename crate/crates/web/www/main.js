import init, {
  drive_trace, drive_support, drive_ticks, butterworth_response, butterworth_step, trot_schedule,
} from "./pkg/gaitspace_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function frame(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "22px system-ui";
  ctx.lineWidth = 2;
  return ctx;
}

// Plot series of [x, y] onto `canvas` with the given ranges and a zero line.
function plot(canvas, series, [x0, x1], [y0, y1], labels = {}) {
  const ctx = frame(canvas);
  const pad = 50;
  const w = canvas.width - 2 * pad;
  const h = canvas.height - 2 * pad;
  const px = (x) => pad + ((x - x0) / (x1 - x0)) * w;
  const py = (y) => pad + (1 - (y - y0) / (y1 - y0)) * h;
  ctx.strokeStyle = "#bbb";
  ctx.strokeRect(pad, pad, w, h);
  if (y0 < 0 && y1 > 0) {
    ctx.beginPath();
    ctx.moveTo(px(x0), py(0));
    ctx.lineTo(px(x1), py(0));
    ctx.stroke();
  }
  ctx.fillStyle = "#555";
  ctx.fillText(`${y1}`, 4, pad + 8);
  ctx.fillText(`${y0}`, 4, pad + h);
  if (labels.x) ctx.fillText(labels.x, pad + w - 160, canvas.height - 12);
  for (const { points, color, marks } of series) {
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    if (marks) {
      for (const [x, y] of points) ctx.fillRect(px(x) - 3, py(y) - 3, 6, 6);
      continue;
    }
    ctx.beginPath();
    points.forEach(([x, y], i) => (i ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y))));
    ctx.stroke();
  }
}

function drawDrive() {
  const hz = num("hz");
  const ticks = Math.round(num("window") * hz);
  const args = [num("amp"), num("swing"), num("stance"), hz, ticks];
  const v = drive_trace(...args);
  const support = drive_support(...args);
  const [period, stance, swing] = drive_ticks(num("swing"), num("stance"), hz);
  const amp = Math.max(num("amp"), 1e-9);
  const line = Array.from(v, (y, t) => [t / hz, y]);
  const held = line.filter((_, t) => support[t]);
  plot($("drive"), [{ points: line, color: "#1f6feb" }, { points: held, color: "#d1242f", marks: true }],
    [0, ticks / hz], [-amp * 1.1, amp * 1.1], { x: "time (s)" });
  $("drive-readout").textContent =
    `T = ${period} ticks, lobe = ${swing} ticks, hold = ${stance} ticks (red: ${stance + 1} support ticks per zero crossing)`;
}

function drawSchedule() {
  const hz = num("hz");
  const ticks = Math.round(num("window") * hz);
  const s = trot_schedule(num("swing"), num("stance"), hz, ticks);
  const canvas = $("schedule");
  const ctx = frame(canvas);
  const pad = 60;
  const rowH = (canvas.height - 2 * 20) / 4;
  const w = (canvas.width - pad - 10) / ticks;
  ["LF", "RF", "LH", "RH"].forEach((name, leg) => {
    ctx.fillStyle = "#555";
    ctx.fillText(name, 8, 20 + rowH * leg + rowH * 0.6);
    ctx.fillStyle = leg === 0 || leg === 3 ? "#1f6feb" : "#8250df";
    for (let t = 0; t < ticks; t++) {
      if (s[4 * t + leg]) ctx.fillRect(pad + t * w, 20 + rowH * leg + 6, Math.ceil(w), rowH - 12);
    }
  });
}

function drawFilter() {
  const hz = num("hz");
  const cutoff = num("cutoff");
  const r = butterworth_response(cutoff, hz, 400);
  if (!r.length) {
    $("bode-readout").textContent = `cutoff must lie below ${hz / 2} Hz`;
    return;
  }
  const pts = [];
  for (let i = 0; i < r.length; i += 2) pts.push([r[i], Math.max(r[i + 1], -80)]);
  const marker = [[cutoff, -3.0103]];
  plot($("bode"), [{ points: pts, color: "#1f6feb" }, { points: marker, color: "#d1242f", marks: true }],
    [0, hz / 2], [-80, 5], { x: "frequency (Hz)" });
  $("bode-readout").textContent = `second-order Butterworth, ${hz} Hz sampling; red marks -3.01 dB at ${cutoff} Hz`;
  const step = butterworth_step(cutoff, hz, Math.round(hz));
  plot($("step"), [{ points: Array.from(step, (y, t) => [t / hz, y]), color: "#1a7f37" }], [0, 1], [0, 1.2],
    { x: "step response, time (s)" });
}

function redraw() {
  drawDrive();
  drawSchedule();
  drawFilter();
}

await init();
for (const input of document.querySelectorAll("input")) input.addEventListener("input", redraw);
redraw();
