import { fnv1a64 } from "./hash.js";

export interface EmbeddingBackend {
  readonly modelId: string;
  readonly dim: number;
  embed(texts: string[]): number[][];
}

const TOKEN_RE = /[\p{L}\p{N}]+/gu;

/**
 * Deterministic reference embedder: lowercased alphanumeric tokens hashed
 * into `dim` signed buckets, L2-normalized. A text with no tokens maps to
 * the unit vector e1 so no response vector is ever all-zero.
 */
export class HashedBagOfWordsEmbedder implements EmbeddingBackend {
  readonly modelId: string;
  readonly dim: number;

  constructor(dim = 384) {
    if (dim < 2) throw new Error("dim must be >= 2");
    this.dim = dim;
    this.modelId = `hashed-bow-${dim}-v1`;
  }

  embed(texts: string[]): number[][] {
    return texts.map((text) => this.embedOne(text));
  }

  private embedOne(text: string): number[] {
    const vector = new Array<number>(this.dim).fill(0);
    for (const match of text.toLowerCase().matchAll(TOKEN_RE)) {
      const hash = fnv1a64(match[0]);
      const bucket = Number(hash % BigInt(this.dim));
      const sign = (hash >> 32n) & 1n ? 1 : -1;
      vector[bucket] += sign;
    }
    let norm = Math.sqrt(vector.reduce((acc, v) => acc + v * v, 0));
    if (norm === 0) {
      vector[0] = 1;
      return vector;
    }
    return vector.map((v) => v / norm);
  }
}

export function createEmbedder(modelId: string): EmbeddingBackend | undefined {
  const match = /^hashed-bow-(\d+)-v1$/.exec(modelId);
  if (match) {
    return new HashedBagOfWordsEmbedder(Number(match[1]));
  }
  return undefined; // unknown checkpoint: reported as not loaded
}
