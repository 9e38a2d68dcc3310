import { ApiClient } from "../api.js";
import { UiSession } from "../session.js";
import { CategoryRef, METHOD_KEYS, METHOD_LABELS, MethodKey } from "../types.js";

export interface OverlayHandlers {
    onMethodChange(method: MethodKey): void;
    onAlphaChange(alpha: number): void;
    onCategoryChange(categoryId: number): void;
}

/** Side-by-side raw image / annotations note / explanation overlay with a
 *  method selector and an alpha slider. At alpha 0 the raw image is shown
 *  (byte-for-byte, via the image endpoint). */
export function renderOverlayView(
    container: HTMLElement,
    api: ApiClient,
    session: UiSession,
    categories: CategoryRef[],
    activeCategory: number,
    handlers: OverlayHandlers,
): void {
    container.innerHTML = "";
    if (session.selectedImageId === null) {
        const hint = document.createElement("p");
        hint.className = "empty-state";
        hint.textContent = "Pick an image in the gallery to inspect explanations.";
        container.appendChild(hint);
        return;
    }
    const imageId = session.selectedImageId;

    const methodBar = document.createElement("div");
    methodBar.className = "method-bar";
    for (const key of METHOD_KEYS) {
        const button = document.createElement("button");
        button.textContent = METHOD_LABELS[key];
        button.dataset.method = key;
        button.className = key === session.selectedMethod ? "method active" : "method";
        button.addEventListener("click", () => handlers.onMethodChange(key));
        methodBar.appendChild(button);
    }

    const categorySelect = document.createElement("select");
    categorySelect.className = "category-select";
    for (const category of categories) {
        const option = document.createElement("option");
        option.value = String(category.id);
        option.textContent = category.name;
        option.selected = category.id === activeCategory;
        categorySelect.appendChild(option);
    }
    categorySelect.addEventListener("change", () =>
        handlers.onCategoryChange(Number(categorySelect.value)),
    );

    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0";
    slider.max = "1";
    slider.step = "0.05";
    slider.value = String(session.alpha);
    slider.className = "alpha-slider";
    slider.addEventListener("input", () => handlers.onAlphaChange(Number(slider.value)));
    const sliderLabel = document.createElement("label");
    sliderLabel.className = "alpha-label";
    sliderLabel.textContent = `alpha ${session.alpha.toFixed(2)}`;
    sliderLabel.appendChild(slider);

    const panel = document.createElement("div");
    panel.className = "overlay-panel";
    const original = document.createElement("img");
    original.className = "panel-original";
    original.src = api.imageUrl(imageId);

    const overlay = document.createElement("img");
    overlay.className = "panel-overlay";
    overlay.src =
        session.alpha === 0
            ? api.imageUrl(imageId)
            : api.overlayUrl(imageId, session.selectedMethod, activeCategory, session.alpha);
    overlay.addEventListener("error", () => {
        const note = document.createElement("p");
        note.className = "overlay-error";
        note.textContent = "No explanation available: train stage not run for this workspace.";
        panel.appendChild(note);
    });

    panel.append(original, overlay);
    container.append(methodBar, categorySelect, sliderLabel, panel);
}
