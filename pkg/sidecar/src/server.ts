import { createApp } from "./app.js";
import { configFromEnv } from "./config.js";

const config = configFromEnv();
const { app, embedder, generator } = createApp(config);

app.listen(config.port, () => {
  console.log(
    `sidecar on http://127.0.0.1:${config.port} ` +
      `(embedding=${embedder?.modelId ?? "NOT LOADED"}, ` +
      `generation=${generator?.modelId ?? "NOT LOADED"})`,
  );
});
