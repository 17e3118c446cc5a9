import type { AcPayload, Statement } from "./types";

export const MIN_K = 1;
export const MAX_K = 100;

export function clampK(k: number): number {
  if (!Number.isFinite(k)) return 10;
  return Math.min(MAX_K, Math.max(MIN_K, Math.round(k)));
}

/**
 * Composition preview must equal the service-side rendering byte for
 * byte: trimmed free text first, then selected statement texts joined by
 * single spaces in ascending statement-id order, duplicates collapsed.
 */
export function composeDescription(freeText: string, statements: Map<string, Statement>): string {
  const parts: string[] = [];
  const trimmed = freeText.trim();
  if (trimmed) parts.push(trimmed);
  for (const id of [...statements.keys()].sort()) {
    const text = statements.get(id)!.text.trim();
    if (text) parts.push(text);
  }
  return parts.join(" ");
}

export class SelectionState {
  /** category name -> optional chosen intensity word */
  readonly categories = new Map<string, string | undefined>();
  readonly statements = new Map<string, Statement>();
  freeText = "";
  k = 10;
  userId = "";

  selectCategory(name: string, intensity?: string): void {
    this.categories.set(name, intensity);
  }

  deselectCategory(name: string): void {
    this.categories.delete(name);
  }

  toggleCategory(name: string, intensity?: string): boolean {
    if (this.categories.has(name) && this.categories.get(name) === intensity) {
      this.categories.delete(name);
      return false;
    }
    this.categories.set(name, intensity);
    return true;
  }

  toggleStatement(statement: Statement): boolean {
    if (this.statements.has(statement.id)) {
      this.statements.delete(statement.id);
      return false;
    }
    this.statements.set(statement.id, statement);
    return true;
  }

  setFreeText(text: string): void {
    this.freeText = text;
  }

  setK(k: number): void {
    this.k = clampK(k);
  }

  preview(): string {
    return composeDescription(this.freeText, this.statements);
  }

  canRecommend(): boolean {
    return this.userId.trim() !== "" && this.preview() !== "";
  }

  toAcPayload(): AcPayload {
    const ac: AcPayload = {};
    const trimmed = this.freeText.trim();
    if (trimmed) ac.free_text = trimmed;
    if (this.statements.size > 0) ac.statement_ids = [...this.statements.keys()].sort();
    return ac;
  }
}
