import { ApiClient } from "../api.js";
import { ImageEntry } from "../types.js";

export interface GalleryHandlers {
    onSelect(imageId: number): void;
}

function badgeText(iou: number | null): string {
    return iou === null ? "no GT" : `IoU ${iou.toFixed(1)}`;
}

/** Grid of dataset images with per-image predicted-vs-GT IoU badges. */
export function renderGallery(
    container: HTMLElement,
    api: ApiClient,
    images: ImageEntry[],
    handlers: GalleryHandlers,
): void {
    container.innerHTML = "";
    if (images.length === 0) {
        const empty = document.createElement("p");
        empty.className = "empty-state";
        empty.textContent = "No images in the dataset yet. Run the synth stage first.";
        container.appendChild(empty);
        return;
    }
    const grid = document.createElement("div");
    grid.className = "gallery-grid";
    for (const entry of images) {
        const card = document.createElement("figure");
        card.className = "gallery-card";
        card.dataset.imageId = String(entry.id);

        const img = document.createElement("img");
        img.src = api.imageUrl(entry.id);
        img.alt = entry.file_name;
        img.width = entry.width * 2;
        img.height = entry.height * 2;

        const caption = document.createElement("figcaption");
        const name = document.createElement("span");
        name.textContent = entry.file_name;
        const badge = document.createElement("span");
        badge.className = "iou-badge";
        badge.textContent = badgeText(entry.iou);
        caption.append(name, badge);

        card.append(img, caption);
        card.addEventListener("click", () => handlers.onSelect(entry.id));
        grid.appendChild(card);
    }
    container.appendChild(grid);
}

export function renderOfflineBanner(container: HTMLElement, message: string): void {
    container.innerHTML = "";
    const banner = document.createElement("div");
    banner.className = "offline-banner";
    banner.textContent = `Backend unreachable: ${message}`;
    container.appendChild(banner);
}
