import { ApiClient } from "./api";
import { gridToNotes, Player } from "./audio";
import { StaleSessionError, Studio } from "./controller";
import { canvasSize, paintRoll } from "./roll-canvas";
import "./style.css";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

const banner = $("banner");

function showError(message: string): void {
  banner.textContent = message;
  banner.classList.add("visible");
}

banner.addEventListener("click", () => banner.classList.remove("visible"));

async function guarded(studio: Studio | null, action: () => Promise<void>): Promise<void> {
  try {
    await action();
  } catch (err) {
    if (err instanceof StaleSessionError && studio) {
      showError("session expired, starting a fresh one");
      await studio.seedRandom();
      render(studio);
      return;
    }
    showError(err instanceof Error ? err.message : String(err));
  }
}

const player = new Player();

function render(studio: Studio): void {
  const canvas = $<HTMLCanvasElement>("roll");
  paintRoll(canvas, studio.roll, { seedCols: studio.info.window_cols });
  const { width } = canvasSize(studio.roll);
  $("roll-scroll").scrollLeft = width;

  $("status").textContent =
    `T=${studio.info.window_seconds}s  pitches ${studio.info.pitch_lo}-${studio.info.pitch_hi}  ` +
    `step ${studio.stepsTaken}  columns ${studio.roll.nCols}`;

  const thresholdInput = $<HTMLInputElement>("threshold");
  thresholdInput.value = studio.threshold.toFixed(2);
  $("threshold-label").textContent = studio.threshold.toFixed(2);

  renderSliders(studio);
  $<HTMLButtonElement>("step").disabled = studio.stepping || !studio.sessionId;
  $<HTMLButtonElement>("export").disabled = !studio.sessionId;
}

function renderSliders(studio: Studio): void {
  const host = $("sliders");
  host.innerHTML = "";
  for (const dim of studio.sliders.dims) {
    const row = document.createElement("label");
    row.className = "slider-row";
    const value = studio.sliders.deltas.get(dim) ?? 0;
    const name = document.createElement("span");
    name.textContent = `z[${dim}]`;
    const input = document.createElement("input");
    input.type = "range";
    input.min = "-3";
    input.max = "3";
    input.step = "0.1";
    input.value = String(value);
    const amount = document.createElement("span");
    amount.textContent = value.toFixed(1);
    input.addEventListener("input", () => {
      studio.sliders.setDelta(dim, Number(input.value));
      amount.textContent = Number(input.value).toFixed(1);
    });
    row.append(name, input, amount);
    host.appendChild(row);
  }
}

async function boot(): Promise<void> {
  const api = new ApiClient("");
  let studio: Studio;
  try {
    studio = await Studio.connect(api);
  } catch (err) {
    showError(`cannot reach the composer service: ${err instanceof Error ? err.message : err}`);
    return;
  }

  $("step").addEventListener("click", () =>
    guarded(studio, async () => {
      const newCols = await studio.step();
      render(studio);
      player.play(gridToNotes(newCols, studio.info.pitch_lo, studio.info.grid_ms));
    }),
  );

  $("seed-random").addEventListener("click", () =>
    guarded(studio, async () => {
      const seedField = $<HTMLInputElement>("seed");
      const seed = seedField.value === "" ? undefined : Number(seedField.value);
      await studio.seedRandom(seed);
      render(studio);
    }),
  );

  $<HTMLInputElement>("midi-file").addEventListener("change", (event) =>
    guarded(studio, async () => {
      const input = event.target as HTMLInputElement;
      const file = input.files?.[0];
      if (!file) return;
      const ingest = await api.uploadMidi(await file.arrayBuffer(), file.name);
      if (ingest.dropped_notes > 0) {
        showError(`${ingest.dropped_notes} notes fell outside the model's pitch range`);
      }
      await studio.seedFromIngest(ingest);
      render(studio);
      input.value = "";
    }),
  );

  $<HTMLInputElement>("threshold").addEventListener("change", (event) => {
    const value = Number((event.target as HTMLInputElement).value);
    studio.setThreshold(value);
    $("threshold-label").textContent = value.toFixed(2);
  });

  $<HTMLInputElement>("persist-sliders").addEventListener("change", (event) => {
    studio.sliders.persist = (event.target as HTMLInputElement).checked;
  });

  $("export").addEventListener("click", () =>
    guarded(studio, async () => {
      const data = await studio.exportMidi();
      const url = URL.createObjectURL(new Blob([data], { type: "audio/midi" }));
      const a = document.createElement("a");
      a.href = url;
      a.download = "composition.mid";
      a.click();
      URL.revokeObjectURL(url);
    }),
  );

  await guarded(studio, async () => {
    await studio.seedRandom(0);
    render(studio);
  });
}

void boot();
