import express, { type Express } from "express";
import { z } from "zod";

import { type SidecarConfig, DEFAULT_CONFIG } from "./config.js";
import { createEmbedder, type EmbeddingBackend } from "./embedder.js";
import { createGenerator, type GenerationBackend } from "./generator.js";

const generateSchema = z.object({
  system: z.string(),
  user: z.string(),
  n: z.number().int().min(1),
  temperature: z.number().min(0),
  max_tokens: z.number().int().min(1),
});

export interface Sidecar {
  app: Express;
  embedder?: EmbeddingBackend;
  generator?: GenerationBackend;
}

export function createApp(config: SidecarConfig = DEFAULT_CONFIG): Sidecar {
  const embedder = createEmbedder(config.embeddingModel);
  const generator = createGenerator(config.generationModel);

  const embedSchema = z.object({
    texts: z.array(z.string()).min(1).max(config.maxBatchSize),
  });

  const app = express();
  app.use(express.json({ limit: "10mb" }));

  app.get("/health", (_req, res) => {
    res.json({ status: "ok" });
  });

  app.get("/info", (_req, res) => {
    res.json({
      embed_dim: embedder?.dim ?? null,
      models: {
        embedding: embedder?.modelId ?? null,
        generation: generator?.modelId ?? null,
      },
    });
  });

  app.post("/embed", (req, res) => {
    if (!embedder) {
      res.status(503).json({ error: `embedding model ${config.embeddingModel} not loaded` });
      return;
    }
    const parsed = embedSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? "bad request" });
      return;
    }
    const vectors = embedder.embed(parsed.data.texts);
    // every response vector must match the advertised dimension
    for (const vector of vectors) {
      if (vector.length !== embedder.dim) {
        res.status(500).json({ error: "internal dimension mismatch" });
        return;
      }
    }
    res.json({ vectors });
  });

  app.post("/generate", (req, res) => {
    if (!generator) {
      res.status(503).json({ error: `generation model ${config.generationModel} not loaded` });
      return;
    }
    const parsed = generateSchema.safeParse(req.body);
    if (!parsed.success) {
      res.status(400).json({ error: parsed.error.issues[0]?.message ?? "bad request" });
      return;
    }
    res.json({ completions: generator.generate(parsed.data) });
  });

  // malformed JSON bodies surface as 400, not a stack trace
  app.use(
    (err: Error, _req: express.Request, res: express.Response, next: express.NextFunction) => {
      if (err instanceof SyntaxError) {
        res.status(400).json({ error: "invalid JSON body" });
        return;
      }
      next(err);
    },
  );

  return { app, embedder, generator };
}
