import type { InputResponse } from "./types.js";

// Flat card model: the values the card widget binds to. Every field is
// copied verbatim from the response payload so what the operator reads is
// exactly what the server said; formatting happens only at render time.
export interface CardModel {
  outcome: string;
  latency_s: number;
  error: string;
  description: string;
  intent: string;
  intent_text: string;
  confidence: number;
  valence: number;
  arousal: number;
  quadrant: string;
  primitive_token: string;
  primitive: string;
  display_text: string;
  fell_back: boolean;
  amplitude_scale: number;
  tempo_scale: number;
  openness: number;
}

export function cardFields(doc: InputResponse): CardModel {
  return {
    outcome: doc.outcome,
    latency_s: doc.latency_s,
    error: doc.error,
    description: doc.output.description,
    intent: doc.output.intent,
    intent_text: doc.output.intent_text,
    confidence: doc.output.confidence,
    valence: doc.output.valence,
    arousal: doc.output.arousal,
    quadrant: doc.output.quadrant,
    primitive_token: doc.output.primitive_token,
    primitive: doc.decision.primitive,
    display_text: doc.decision.display_text,
    fell_back: doc.decision.fell_back,
    amplitude_scale: doc.decision.style.amplitude_scale,
    tempo_scale: doc.decision.style.tempo_scale,
    openness: doc.decision.style.openness,
  };
}

export function cardLines(model: CardModel): [string, string][] {
  const num = (x: number) => x.toFixed(2);
  return [
    ["description", model.description],
    ["intent", `${model.intent} (${num(model.confidence)})`],
    ["detail", model.intent_text],
    ["affect", `V ${num(model.valence)}  A ${num(model.arousal)}  ${model.quadrant}`],
    ["motion", `${model.display_text} [${model.primitive}]`],
    [
      "style",
      `amp ${num(model.amplitude_scale)}  tempo ${num(model.tempo_scale)}  open ${num(model.openness)}`,
    ],
    ["decision", model.fell_back ? "fell back to safe idle" : "accepted"],
    ["latency", `${model.latency_s.toFixed(3)} s`],
  ];
}
