import { ApiClient } from "./api.js";
import { App } from "./app.js";

function panel(id: string): HTMLElement {
    const element = document.getElementById(id);
    if (!element) {
        throw new Error(`missing #${id} in index.html`);
    }
    return element;
}

const app = new App(new ApiClient(""), {
    gallery: panel("gallery"),
    overlay: panel("overlay"),
    plan: panel("plan"),
    comparison: panel("comparison"),
});

void app.start();
