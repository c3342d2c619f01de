// Thin client: captures timed strokes and typed words, sends them to the
// session endpoints and shows the composed canvas.
"use strict";

const pad = document.getElementById("pad");
const ctx = pad.getContext("2d");
const text = document.getElementById("narrative");
const statusBox = document.getElementById("status");

let session = null;
let clock0 = null;
let pending = [];
let words = [];
let wordStart = null;
let lastTraceMs = 0;
let palette = {};
let drawing = false;

const now = () => {
  if (clock0 === null) clock0 = performance.now();
  return Math.round(performance.now() - clock0);
};

async function api(method, path, body) {
  const res = await fetch(path, {
    method,
    headers: body ? { "Content-Type": "application/json" } : {},
    body: body ? JSON.stringify(body) : undefined,
  });
  const data = await res.json().catch(() => ({}));
  if (!res.ok) throw new Error(data.error || res.statusText);
  return data;
}

function report(err) {
  statusBox.textContent = err ? String(err.message || err) : "";
}

async function start() {
  try {
    const labels = await api("GET", "/labels");
    for (const l of labels.labels) palette[l.name] = l.color;
    session = (await api("POST", "/sessions")).id;
    report(null);
  } catch (e) {
    report(e);
    document.getElementById("compose").disabled = true;
  }
}

function point(ev) {
  const r = pad.getBoundingClientRect();
  const clamp = (v) => Math.min(1, Math.max(0, v));
  return { x: clamp((ev.clientX - r.left) / r.width), y: clamp((ev.clientY - r.top) / r.height), t_ms: now() };
}

pad.addEventListener("pointerdown", (ev) => {
  drawing = true;
  const p = point(ev);
  pending.push(p);
  ctx.beginPath();
  ctx.moveTo(p.x * pad.width, p.y * pad.height);
});

pad.addEventListener("pointermove", (ev) => {
  if (!drawing) return;
  const p = point(ev);
  pending.push(p);
  ctx.lineTo(p.x * pad.width, p.y * pad.height);
  ctx.stroke();
});

pad.addEventListener("pointerup", async () => {
  drawing = false;
  await flushTrace();
});

async function flushTrace() {
  if (!session || pending.length === 0) return;
  const points = pending;
  pending = [];
  lastTraceMs = points[points.length - 1].t_ms;
  try {
    await api("POST", `/sessions/${session}/trace`, { points });
  } catch (e) {
    report(e);
  }
}

// a word is stamped from its first keystroke to the keystroke that ends it
text.addEventListener("keydown", (ev) => {
  if (ev.key.length === 1 && ev.key.trim() !== "" && wordStart === null) wordStart = now();
  if ((ev.key === " " || ev.key === "Enter") && wordStart !== null) {
    commitWord(text.value.slice(text.value.lastIndexOf(" ") + 1));
  }
});

function commitWord(raw) {
  const w = raw.trim();
  if (w) words.push({ word: w, start_ms: wordStart, end_ms: now() });
  wordStart = null;
}

async function sendNarrative() {
  if (wordStart !== null) commitWord(text.value.slice(text.value.lastIndexOf(" ") + 1));
  const typed = text.value.trim().split(/\s+/).filter(Boolean);
  const inSync = typed.length === words.length && words.length > 0 && words[0].start_ms <= lastTraceMs;
  const body = inSync ? { words } : { text: text.value, mode: "auto-stamp" };
  await api("PUT", `/sessions/${session}/narrative`, body);
}

document.getElementById("tag").addEventListener("click", async () => {
  try {
    await flushTrace();
    await sendNarrative();
    const { tags } = await api("GET", `/sessions/${session}/tags`);
    const box = document.getElementById("tags");
    box.innerHTML = "";
    for (const t of tags) {
      const s = document.createElement("span");
      s.textContent = `${t.word}/${t.label}`;
      const c = palette[t.label] || [80, 80, 80];
      s.style.background = `rgb(${c.join(",")})`;
      box.appendChild(s);
    }
    report(null);
  } catch (e) {
    report(e);
  }
});

document.getElementById("compose").addEventListener("click", async () => {
  try {
    await flushTrace();
    await sendNarrative();
    const out = await api("POST", `/sessions/${session}/compose`);
    document.getElementById("result").src = out.files["color.png"];
    const meta = await api("GET", out.files["meta.json"]);
    const legend = document.getElementById("legend");
    legend.innerHTML = "";
    for (const row of meta.legend) {
      const tr = legend.insertRow();
      tr.insertCell().innerHTML = `<span class="swatch" style="background: rgb(${row.color.join(",")})"></span>`;
      tr.insertCell().textContent = row.name;
      tr.insertCell().textContent = `${(100 * row.share).toFixed(1)}%`;
    }
    const list = document.getElementById("instances");
    list.innerHTML = "";
    for (const i of out.instances) {
      const li = document.createElement("li");
      li.textContent = `${i.class} "${i.words}" ← ${i.mask_source || "(background)"}`;
      list.appendChild(li);
    }
    report(null);
  } catch (e) {
    report(e);
  }
});

document.getElementById("clear").addEventListener("click", async () => {
  ctx.clearRect(0, 0, pad.width, pad.height);
  text.value = "";
  words = [];
  pending = [];
  clock0 = null;
  wordStart = null;
  lastTraceMs = 0;
  document.getElementById("tags").innerHTML = "";
  document.getElementById("legend").innerHTML = "";
  document.getElementById("instances").innerHTML = "";
  document.getElementById("result").removeAttribute("src");
  await start();
});

start();
