/**
 * Browser wiring: toolbar ↔ REST, canvas ↔ WebSocket snapshots. All state
 * shown anywhere on the page is a projection of the last server message.
 */

import { Api, LiveSession, type WsLike } from "./client";
import { endDrag, dragPreviewPoints, moveDrag, startDrag, type DragState } from "./drag";
import type { SceneView } from "./protocol";
import { renderFrame, drawAutomaton, type Ctx2D } from "./render";
import { type Camera, makeCamera } from "./transform";
import { banner, emptyViewModel, statusLine, type ViewModel } from "./viewmodel";

const api = new Api("");

/** A relative ws path is resolved against the page's own host. */
function browserWsFactory(url: string): WsLike {
  const absolute = url.startsWith("/")
    ? `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}${url}`
    : url;
  return new WebSocket(absolute) as unknown as WsLike;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const sceneSelect = el<HTMLSelectElement>("scene-select");
const specSelect = el<HTMLSelectElement>("spec-select");
const variantSelect = el<HTMLSelectElement>("variant-select");
const seedInput = el<HTMLInputElement>("seed-input");
const newButton = el<HTMLButtonElement>("new-session");
const pauseButton = el<HTMLButtonElement>("pause-resume");
const modButton = el<HTMLButtonElement>("toggle-mod");
const cutButton = el<HTMLButtonElement>("toggle-cut");
const resetButton = el<HTMLButtonElement>("reset-session");
const forgetCheck = el<HTMLInputElement>("forget-cuts");
const gridCheck = el<HTMLInputElement>("show-grid");
const modulatedCheck = el<HTMLInputElement>("show-modulated");
const bannerDiv = el<HTMLDivElement>("banner");
const statusDiv = el<HTMLDivElement>("status");
const specPre = el<HTMLPreElement>("spec-text");
const canvas = el<HTMLCanvasElement>("workspace-canvas");
const autoCanvas = el<HTMLCanvasElement>("automaton-canvas");

const ctx = canvas.getContext("2d") as unknown as Ctx2D;
const autoCtx = autoCanvas.getContext("2d") as unknown as Ctx2D;

const vm: ViewModel = emptyViewModel();
let live: LiveSession | null = null;
let camera: Camera | null = null;
let drag: DragState | null = null;

function redraw(): void {
  if (camera === null || vm.scene === null) return;
  renderFrame(ctx, camera, vm);
  const snap = vm.snapshot;
  autoCtx.clearRect(0, 0, autoCanvas.width, autoCanvas.height);
  if (snap !== null) {
    drawAutomaton(
      autoCtx,
      snap.automaton,
      snap.commanded,
      autoCanvas.width,
      autoCanvas.height,
    );
  }
  const b = banner(snap);
  bannerDiv.textContent = b.text;
  bannerDiv.dataset.kind = b.kind;
  statusDiv.textContent = statusLine(vm);
  pauseButton.textContent = snap?.paused === false ? "Pause" : "Resume";
  modButton.dataset.on = String(snap?.modulation_enabled ?? false);
  cutButton.dataset.on = String(snap?.cutting_enabled ?? false);
}

function setScene(scene: SceneView): void {
  vm.scene = scene;
  camera = makeCamera(scene.workspace, canvas.width, canvas.height);
}

async function loadAssets(): Promise<void> {
  const assets = await api.listAssets();
  const fill = (select: HTMLSelectElement, names: string[]) => {
    select.innerHTML = "";
    for (const name of names) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name;
      select.appendChild(option);
    }
  };
  fill(sceneSelect, assets.scenes);
  fill(specSelect, assets.specs);
  fill(variantSelect, assets.variants);
  sceneSelect.value = "scooping";
  specSelect.value = "scooping_full";
  variantSelect.value = "ds+mod";
}

async function newSession(): Promise<void> {
  if (live !== null) {
    live.close();
    live = null;
  }
  if (vm.sessionId !== null) {
    await api.closeSession(vm.sessionId).catch(() => undefined);
  }
  vm.connection = "connecting";
  vm.statusNote = "building policy library…";
  statusDiv.textContent = vm.statusNote;
  const [scene, spec, created] = await Promise.all([
    api.scene(sceneSelect.value),
    api.specText(specSelect.value),
    api.createSession({
      scene: sceneSelect.value,
      spec: specSelect.value,
      variant: variantSelect.value,
      config: { seed: Number(seedInput.value) || 0 },
    }),
  ]);
  setScene(scene);
  specPre.textContent = spec.text;
  vm.sessionId = created.id;
  vm.snapshot = created.snapshot;
  live = new LiveSession("", created.id, {
    onSnapshot: (snap) => {
      vm.snapshot = snap;
      redraw();
    },
    onError: (err) => {
      vm.statusNote = err.message;
    },
    onClose: () => {
      vm.connection = "closed";
    },
    onProtocolError: (err) => {
      vm.connection = "error";
      vm.statusNote = err.message;
      statusDiv.textContent = err.message;
    },
  }, browserWsFactory);
  vm.connection = "live";
  redraw();
}

function canvasPoint(ev: PointerEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  return [
    ((ev.clientX - rect.left) / rect.width) * canvas.width,
    ((ev.clientY - rect.top) / rect.height) * canvas.height,
  ];
}

canvas.addEventListener("pointerdown", (ev) => {
  if (camera === null || vm.sessionId === null) return;
  drag = startDrag(canvasPoint(ev));
  canvas.setPointerCapture(ev.pointerId);
});

canvas.addEventListener("pointermove", (ev) => {
  if (drag === null || camera === null) return;
  drag = moveDrag(drag, canvasPoint(ev));
  vm.drag = dragPreviewPoints(camera, drag);
  redraw();
});

canvas.addEventListener("pointerup", (ev) => {
  if (drag === null || camera === null) return;
  const command = endDrag(camera, drag, canvasPoint(ev));
  drag = null;
  vm.drag = null;
  redraw();
  if (command !== null && live !== null) {
    void live.command(command.cmd, command.args);
  }
});

newButton.addEventListener("click", () => void newSession());
pauseButton.addEventListener("click", () => {
  if (live === null || vm.snapshot === null) return;
  void live.command(vm.snapshot.paused ? "Resume" : "Pause");
});
modButton.addEventListener("click", () => void live?.command("ToggleModulation"));
cutButton.addEventListener("click", () => void live?.command("ToggleCutting"));
resetButton.addEventListener("click", () => {
  void live?.command("Reset", {
    seed: Number(seedInput.value) || 0,
    forget: forgetCheck.checked,
  });
});
gridCheck.addEventListener("change", () => {
  vm.showGrid = gridCheck.checked;
  redraw();
});
modulatedCheck.addEventListener("change", () => {
  vm.showModulated = modulatedCheck.checked;
  redraw();
});

void loadAssets();
