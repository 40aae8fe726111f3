/** Emotion distribution chart model: one bar per emotion, bar values taken
 *  from the payload untouched so rendered bars always equal the data. */

export const EMOTIONS = [
  "joy",
  "trust",
  "fear",
  "surprise",
  "sadness",
  "disgust",
  "anger",
  "anticipation",
] as const;

export type Emotion = (typeof EMOTIONS)[number];

export interface EmotionBar {
  emotion: Emotion;
  value: number;
  /** Bar width as a percentage of the chart, proportional to value. */
  widthPct: number;
}

export interface EmotionChart {
  bars: EmotionBar[];
  hidden: false;
}

export interface HiddenChart {
  hidden: true;
  notice: string;
}

export function emotionChart(
  weights: Record<string, number> | null | undefined,
): EmotionChart | HiddenChart {
  if (!weights) {
    return { hidden: true, notice: "No emotion metrics available for this report." };
  }
  const missing = EMOTIONS.filter((e) => typeof weights[e] !== "number");
  if (missing.length > 0) {
    return { hidden: true, notice: `Missing emotion weights: ${missing.join(", ")}.` };
  }
  const values = EMOTIONS.map((e) => weights[e] as number);
  if (values.some((v) => v < 0 || !Number.isFinite(v))) {
    return { hidden: true, notice: "Emotion weights out of range." };
  }
  const total = values.reduce((a, b) => a + b, 0);
  if (Math.abs(total - 1) > 1e-6) {
    return { hidden: true, notice: "Emotion weights do not sum to 1." };
  }
  const bars = EMOTIONS.map((emotion, i) => ({
    emotion,
    value: values[i] as number,
    widthPct: (values[i] as number) * 100,
  }));
  return { bars, hidden: false };
}
