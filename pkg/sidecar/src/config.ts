export interface SidecarConfig {
  embeddingModel: string;
  generationModel: string;
  port: number;
  maxBatchSize: number;
}

export const DEFAULT_CONFIG: SidecarConfig = {
  embeddingModel: "hashed-bow-384-v1",
  generationModel: "template-echo-v1",
  port: 8930,
  maxBatchSize: 256,
};

export function configFromEnv(env: NodeJS.ProcessEnv = process.env): SidecarConfig {
  return {
    embeddingModel: env.SIDECAR_EMBEDDING_MODEL ?? DEFAULT_CONFIG.embeddingModel,
    generationModel: env.SIDECAR_GENERATION_MODEL ?? DEFAULT_CONFIG.generationModel,
    port: env.SIDECAR_PORT ? Number(env.SIDECAR_PORT) : DEFAULT_CONFIG.port,
    maxBatchSize: env.SIDECAR_MAX_BATCH
      ? Number(env.SIDECAR_MAX_BATCH)
      : DEFAULT_CONFIG.maxBatchSize,
  };
}
