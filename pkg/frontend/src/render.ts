import type { RecommendItem, Statement } from "./types";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Statement picker panel. Statements with a facet tag group under it;
 * everything else lists flat. */
export function renderStatements(statements: Statement[], selectedIds: ReadonlySet<string>): string {
  if (statements.length === 0) {
    return `<p class="empty">No statements for this selection yet.</p>`;
  }
  const byFacet = new Map<string, Statement[]>();
  for (const s of statements) {
    const facet = s.facet ?? "";
    if (!byFacet.has(facet)) byFacet.set(facet, []);
    byFacet.get(facet)!.push(s);
  }
  const parts: string[] = [];
  for (const [facet, group] of byFacet) {
    if (facet) parts.push(`<h3 class="facet">${esc(facet)}</h3>`);
    parts.push('<ul class="statements">');
    for (const s of group) {
      const cls = selectedIds.has(s.id) ? "statement selected" : "statement";
      parts.push(
        `<li class="${cls}"><label><input type="checkbox" data-statement-id="${esc(s.id)}"` +
          `${selectedIds.has(s.id) ? " checked" : ""}/> ` +
          `<span class="kind">${esc(s.kind)}</span> ${esc(s.text)}</label></li>`,
      );
    }
    parts.push("</ul>");
  }
  return parts.join("");
}

export function renderResults(items: RecommendItem[], expandedId?: string): string {
  if (items.length === 0) {
    return `<p class="empty">No recommendations returned.</p>`;
  }
  const rows = items.map((item, i) => {
    let details = "";
    if (item.book_id === expandedId) {
      const extended = item.extended_description
        ? `<p class="extended">${esc(item.extended_description)}</p>`
        : "";
      details =
        `<div class="details"><p class="original">${esc(item.description ?? "")}</p>` +
        `${extended}</div>`;
    }
    return (
      `<li class="result${item.book_id === expandedId ? " expanded" : ""}" ` +
      `data-book-id="${esc(item.book_id)}">` +
      `<span class="rank">${i + 1}</span> ` +
      `<span class="title">${esc(item.title)}</span> ` +
      `<span class="score">${item.score.toFixed(4)}</span>${details}</li>`
    );
  });
  return `<ol class="results">${rows.join("")}</ol>`;
}

export function renderError(message: string, retryable: boolean): string {
  const retry = retryable ? ' <button type="button" data-action="retry">Retry</button>' : "";
  return `<p class="error" role="alert">${esc(message)}${retry}</p>`;
}

export function renderPreview(preview: string): string {
  if (!preview) {
    return `<p class="empty">Select statements or type what you want to feel.</p>`;
  }
  return `<blockquote class="preview">${esc(preview)}</blockquote>`;
}
