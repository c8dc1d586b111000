/**
 * Pure helpers over the gateway session view: phase guards, keyword input
 * parsing, and export in the batch pipeline's file formats.
 */

import type { SessionView } from "./api.js";

export function canEditKeywords(view: SessionView): boolean {
  return view.phase === "keywords_ready";
}

export function canPinKnowledge(view: SessionView): boolean {
  return view.phase === "knowledge_ready";
}

export function canStep(view: SessionView): boolean {
  return view.phase === "knowledge_ready";
}

export function isComplete(view: SessionView): boolean {
  return view.phase === "complete";
}

/** Split a "kw1 ; kw2" editor value into clean keyword phrases. */
export function parseKeywordInput(raw: string): string[] {
  const seen = new Set<string>();
  const phrases: string[] = [];
  for (const chunk of raw.split(";")) {
    const phrase = chunk.trim().toLowerCase().split(/\s+/).filter(Boolean).join(" ");
    if (phrase && !seen.has(phrase)) {
      seen.add(phrase);
      phrases.push(phrase);
    }
  }
  return phrases;
}

/** One story per line, sentences joined by tabs (the batch story format). */
export function storyLine(view: SessionView): string {
  return view.steps.map((s) => s.sentence).join("\t");
}

/** Plan-log sidecar: step<TAB>keywords<TAB>triple_ids, " ; " between phrases. */
export function planLog(view: SessionView): string {
  const lines = view.steps.map((step, index) => {
    const keywords = step.keywords.join(" ; ");
    const ids = step.knowledge.map((k) => k.triple_id).join(",");
    return `${index + 1}\t${keywords}\t${ids}`;
  });
  return lines.join("\n") + "\n";
}
