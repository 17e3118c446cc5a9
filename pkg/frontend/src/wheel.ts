import type { EmotionCategory, WheelPayload } from "./types";

export interface IntensityStop {
  word: string;
  x: number;
  y: number;
  r: number;
}

export interface Spoke {
  name: string;
  angleDeg: number; // 0 = 12 o'clock, clockwise
  labelX: number;
  labelY: number;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  stops: IntensityStop[];
}

export interface WheelViewModel {
  size: number;
  center: number;
  spokes: Spoke[];
  otherName: string | null;
}

const SIZE = 640;
const INNER_RADIUS = 70;
const RIM_RADIUS = 280;
const STOP_RADIUS = 7;

// quadrant of the wheel by (valence, control): valence grows to the
// right, control to the top
function quadrantStart(cat: EmotionCategory): number {
  if (cat.valence === "positive" && cat.control === "high") return 0;
  if (cat.valence === "positive" && cat.control === "low") return 90;
  if (cat.valence === "negative" && cat.control === "low") return 180;
  return 270;
}

function polar(center: number, radius: number, angleDeg: number): [number, number] {
  const rad = ((angleDeg - 90) * Math.PI) / 180; // 0deg points up
  return [center + radius * Math.cos(rad), center + radius * Math.sin(rad)];
}

/** Lay the payload's categories out by their valence/control quadrant;
 * nothing about the category set is hardcoded. */
export function layoutWheel(payload: WheelPayload): WheelViewModel {
  const center = SIZE / 2;
  const regular = payload.categories.filter((c) => !c.is_other);
  const other = payload.categories.find((c) => c.is_other);
  const byQuadrant = new Map<number, EmotionCategory[]>();
  for (const cat of regular) {
    const q = quadrantStart(cat);
    if (!byQuadrant.has(q)) byQuadrant.set(q, []);
    byQuadrant.get(q)!.push(cat);
  }
  const spokes: Spoke[] = [];
  for (const [start, cats] of byQuadrant) {
    cats.forEach((cat, i) => {
      const angle = start + ((i + 0.5) * 90) / cats.length;
      const [x1, y1] = polar(center, INNER_RADIUS, angle);
      const [x2, y2] = polar(center, RIM_RADIUS, angle);
      const [labelX, labelY] = polar(center, RIM_RADIUS + 24, angle);
      const n = cat.intensity_levels.length;
      const stops = cat.intensity_levels.map((word, j) => {
        const radius = INNER_RADIUS + ((j + 1) * (RIM_RADIUS - INNER_RADIUS)) / (n + 1);
        const [x, y] = polar(center, radius, angle);
        return { word, x, y, r: STOP_RADIUS };
      });
      spokes.push({ name: cat.name, angleDeg: angle, labelX, labelY, x1, y1, x2, y2, stops });
    });
  }
  spokes.sort((a, b) => a.angleDeg - b.angleDeg);
  return { size: SIZE, center, spokes, otherName: other ? other.name : null };
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** SVG markup for the wheel; selected categories get the "selected"
 * class so active spokes highlight. */
export function renderWheelSvg(model: WheelViewModel, selected: ReadonlySet<string>): string {
  const parts: string[] = [];
  parts.push(
    `<svg viewBox="0 0 ${model.size} ${model.size}" role="img" aria-label="emotion wheel">`,
  );
  parts.push(
    `<circle cx="${model.center}" cy="${model.center}" r="${RIM_RADIUS + 6}" class="wheel-rim"/>`,
  );
  for (const spoke of model.spokes) {
    const cls = selected.has(spoke.name) ? "spoke selected" : "spoke";
    parts.push(`<g data-category="${esc(spoke.name)}" class="${cls}">`);
    parts.push(
      `<line x1="${f(spoke.x1)}" y1="${f(spoke.y1)}" x2="${f(spoke.x2)}" y2="${f(spoke.y2)}"/>`,
    );
    for (const stop of spoke.stops) {
      parts.push(
        `<circle data-category="${esc(spoke.name)}" data-intensity="${esc(stop.word)}" ` +
          `cx="${f(stop.x)}" cy="${f(stop.y)}" r="${stop.r}" class="stop">` +
          `<title>${esc(stop.word)}</title></circle>`,
      );
    }
    parts.push(
      `<text x="${f(spoke.labelX)}" y="${f(spoke.labelY)}" text-anchor="middle">` +
        `${esc(spoke.name)}</text>`,
    );
    parts.push("</g>");
  }
  if (model.otherName) {
    const cls = selected.has(model.otherName) ? "center selected" : "center";
    parts.push(
      `<g data-category="${esc(model.otherName)}" class="${cls}">` +
        `<circle cx="${model.center}" cy="${model.center}" r="${INNER_RADIUS - 14}"/>` +
        `<text x="${model.center}" y="${model.center + 5}" text-anchor="middle">` +
        `${esc(model.otherName)}</text></g>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

function f(x: number): string {
  return x.toFixed(1);
}
