import init, { World, Lab, baseline_curve } from "./pkg/predcode_web.js";

const H = 16, W = 20, SCALE = 16;
const $ = (id) => document.getElementById(id);

function blit(canvas, rgba) {
  const img = new ImageData(new Uint8ClampedArray(rgba), W, H);
  const tmp = new OffscreenCanvas(W, H);
  tmp.getContext("2d").putImageData(img, 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, W * SCALE, H * SCALE);
}

await init();

const world = new World(H, W);
let lab = null;
let timer = null;

function newLab() {
  lab = new Lab(Number($("kernel").value), 60, 1n);
  $("epochs").textContent = "0";
  $("loss").textContent = $("mse").textContent = $("rule").textContent = "-";
}

function draw() {
  blit($("world"), world.rgba());
  blit($("pred"), lab.predict(world));
  $("gen").textContent = world.generation();
  $("alive").textContent = world.alive();
}

function train(n) {
  let loss = 0;
  for (let i = 0; i < n; i++) loss = lab.train_epoch();
  $("epochs").textContent = lab.epochs();
  $("loss").textContent = loss.toFixed(5);
  $("mse").textContent = lab.heldout_mse().toFixed(5);
  $("rule").textContent = lab.rule_matches();
  draw();
}

$("random").onclick = () => { world.randomize(Number($("density").value), BigInt(Date.now())); draw(); };
$("glider").onclick = () => { world.place("glider", 1, 1); draw(); };
$("clear").onclick = () => { world.clear(); draw(); };
$("step").onclick = () => { world.step(); draw(); };
$("torus").onchange = (e) => world.set_toroidal(e.target.checked);
$("run").onclick = () => {
  if (timer) { clearInterval(timer); timer = null; $("run").textContent = "Run"; return; }
  timer = setInterval(() => { world.step(); draw(); }, 150);
  $("run").textContent = "Stop";
};
$("world").onclick = (e) => {
  const r = e.target.getBoundingClientRect();
  world.toggle(Math.floor((e.clientY - r.top) / SCALE), Math.floor((e.clientX - r.left) / SCALE));
  draw();
};
$("reset").onclick = () => { newLab(); draw(); };
$("kernel").onchange = () => { newLab(); draw(); };
$("epoch").onclick = () => train(1);
$("epochs5").onclick = () => train(5);

$("curveBtn").onclick = () => {
  const ds = Array.from({ length: 21 }, (_, i) => i * 0.05);
  const ys = baseline_curve(new Float64Array(ds), 32, 40, 10, 0n);
  const c = $("curve"), ctx = c.getContext("2d");
  const pad = 30, top = Math.max(...ys) * 1.1;
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, 10, c.width - pad - 10, c.height - pad - 10);
  ctx.fillStyle = "#222";
  ctx.fillText("0", pad - 12, c.height - pad + 4);
  ctx.fillText(top.toFixed(3), 0, 18);
  ctx.fillText("density 0 → 1", c.width / 2 - 30, c.height - 8);
  ctx.beginPath();
  ys.forEach((y, i) => {
    const px = pad + (i / (ys.length - 1)) * (c.width - pad - 10);
    const py = c.height - pad - (y / top) * (c.height - pad - 20);
    i ? ctx.lineTo(px, py) : ctx.moveTo(px, py);
  });
  ctx.strokeStyle = "#c33";
  ctx.stroke();
};

world.randomize(0.2, 7n);
newLab();
draw();
