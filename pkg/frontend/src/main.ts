import { fetchHealth } from "./api.js";
import { mountStudio } from "./studio.js";

const params = new URLSearchParams(window.location.search);
const serverUrl = params.get("server") ?? "http://127.0.0.1:8765";

mountStudio(serverUrl);

fetchHealth(serverUrl)
  .then((info) => {
    const label = document.getElementById("model-label");
    if (label) label.textContent = `${info.model_id} (${info.config_hash.slice(0, 8)})`;
  })
  .catch(() => {
    const banner = document.getElementById("error-banner");
    if (banner) {
      banner.textContent = `server unreachable at ${serverUrl} - start one with: turbo-i2i serve`;
      banner.style.display = "block";
    }
  });
