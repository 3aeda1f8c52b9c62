/**
 * Deterministic stand-ins for a model's next-token distribution.
 *
 * The scripted model reproduces the core's scripted mock provider exactly:
 * SCRIPT_MASS on the scripted token for the current step, the remainder
 * uniform over the other ids, end-of-sequence once the script is spent.
 * Both sides compute the same IEEE-754 doubles, which is what makes the
 * adapter path byte-identical to in-process embedding.
 */

export const SCRIPT_MASS = 0.85;

export interface TokenDistributionModel {
  /** Distribution over the vocabulary given the generated history; null = EOS. */
  next(history: readonly number[]): number[] | null;
}

export class ScriptedModel implements TokenDistributionModel {
  constructor(
    readonly vocabSize: number,
    readonly script: readonly number[],
  ) {
    if (script.length === 0) throw new Error("scripted model needs a non-empty script");
    for (const id of script) {
      if (id < 0 || id >= vocabSize) throw new Error(`script token ${id} outside vocabulary`);
    }
  }

  next(history: readonly number[]): number[] | null {
    const step = history.length;
    if (step >= this.script.length) return null;
    const rest = (1.0 - SCRIPT_MASS) / (this.vocabSize - 1);
    const probs = new Array<number>(this.vocabSize).fill(rest);
    probs[this.script[step]] = SCRIPT_MASS;
    return probs;
  }
}

/** Greedy argmax; ties break toward the lowest token id. */
export function argmax(probs: readonly number[]): number {
  let best = 0;
  for (let i = 1; i < probs.length; i++) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

/** Highest-probability id within the allowed set; lowest id wins ties. */
export function argmaxWithin(probs: readonly number[], allowed: readonly number[]): number {
  if (allowed.length === 0) throw new Error("empty allowed set");
  let best = allowed[0];
  for (const id of allowed) {
    if (probs[id] > probs[best]) best = id;
  }
  return best;
}
