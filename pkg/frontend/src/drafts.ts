/** Scenario drafts live entirely client-side: the server stays stateless
 *  about human workflow. Each draft keeps the lineage of forecasts run
 *  against it so operators can iterate on wording. */

export interface ScenarioDraft {
  id: string;
  text: string;
  topicHint: string | null;
  mTotal: number;
  createdAt: number;
  forecastIds: string[];
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const STORAGE_KEY = "respcast.drafts.v1";

export class DraftStore {
  constructor(private readonly storage: StorageLike) {}

  private readAll(): ScenarioDraft[] {
    const raw = this.storage.getItem(STORAGE_KEY);
    if (!raw) return [];
    try {
      const parsed = JSON.parse(raw);
      return Array.isArray(parsed) ? (parsed as ScenarioDraft[]) : [];
    } catch {
      return [];
    }
  }

  private writeAll(drafts: ScenarioDraft[]): void {
    this.storage.setItem(STORAGE_KEY, JSON.stringify(drafts));
  }

  list(): ScenarioDraft[] {
    return this.readAll();
  }

  get(id: string): ScenarioDraft | undefined {
    return this.readAll().find((d) => d.id === id);
  }

  create(text: string, mTotal = 30, topicHint: string | null = null, now = Date.now()): ScenarioDraft {
    if (!text.trim()) {
      throw new Error("draft text must be non-empty");
    }
    if (mTotal < 1 || !Number.isInteger(mTotal)) {
      throw new Error("M must be a positive integer");
    }
    const draft: ScenarioDraft = {
      id: `draft-${now.toString(36)}-${Math.floor(Math.random() * 1e6).toString(36)}`,
      text,
      topicHint,
      mTotal,
      createdAt: now,
      forecastIds: [],
    };
    this.writeAll([...this.readAll(), draft]);
    return draft;
  }

  linkForecast(draftId: string, forecastId: string): ScenarioDraft {
    const drafts = this.readAll();
    const draft = drafts.find((d) => d.id === draftId);
    if (!draft) {
      throw new Error(`unknown draft ${draftId}`);
    }
    if (!draft.forecastIds.includes(forecastId)) {
      draft.forecastIds.push(forecastId);
    }
    this.writeAll(drafts);
    return { ...draft, forecastIds: [...draft.forecastIds] };
  }

  /** JSON export of the whole lineage for sharing or backup. */
  exportJson(): string {
    return JSON.stringify({ version: 1, drafts: this.readAll() }, null, 2);
  }

  importJson(payload: string): number {
    const parsed = JSON.parse(payload);
    if (parsed?.version !== 1 || !Array.isArray(parsed.drafts)) {
      throw new Error("unrecognized draft export format");
    }
    const existing = this.readAll();
    const known = new Set(existing.map((d) => d.id));
    const added = (parsed.drafts as ScenarioDraft[]).filter((d) => !known.has(d.id));
    this.writeAll([...existing, ...added]);
    return added.length;
  }
}

/** In-memory stand-in for window.localStorage (tests, SSR). */
export class MemoryStorage implements StorageLike {
  private data = new Map<string, string>();

  getItem(key: string): string | null {
    return this.data.get(key) ?? null;
  }

  setItem(key: string, value: string): void {
    this.data.set(key, value);
  }
}
