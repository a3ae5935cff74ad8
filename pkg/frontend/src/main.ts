import { Api } from "./api.js";
import { App } from "./app.js";

const root = document.querySelector<HTMLElement>("#app");
if (!root) throw new Error("missing #app mount point");

const app = new App(root, new Api(""), {
  onSession: (id) => {
    location.hash = `s=${id}`;
  },
});

// The session id rides in the fragment so a reload lands back at the
// same table, rebuilt entirely from the server's view of it.
const match = /^#s=([A-Za-z0-9]+)$/.exec(location.hash);
if (match && match[1]) {
  app.load(match[1]);
} else {
  app.showStart();
}
