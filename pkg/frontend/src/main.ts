import { ApiClient } from "./api";
import { GameApp } from "./app";

const root = document.getElementById("app")!;
const api = new ApiClient("");
const app = new GameApp(root, api);

document.getElementById("start")?.addEventListener("click", () => {
  const userId = (document.getElementById("user-id") as HTMLInputElement).value || "anonymous";
  const existing = new URLSearchParams(location.search).get("session");
  void (existing ? app.restore(existing) : app.start(userId));
});
