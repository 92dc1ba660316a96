/**
 * Browser bootstrap: canvas rendering, palette sidebar, keyboard
 * shortcuts, progress panel.  All annotation logic lives in the
 * controller; this file only wires DOM events and draws.
 */

import { ApiClient } from './api.js';
import { AnnotationController } from './controller.js';
import { classForDigit, labelableClasses } from './state.js';
import { compositeOverlay, paletteMap } from './overlay.js';

const api = new ApiClient('');
const canvas = document.getElementById('frame') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const paletteBox = document.getElementById('palette')!;
const gauge = document.getElementById('gauge')!;
const gaugeFill = document.getElementById('gauge-fill')!;
const progressBox = document.getElementById('progress')!;
const toastBox = document.getElementById('toast')!;
const opacitySlider = document.getElementById('opacity') as HTMLInputElement;

let baseImage: Uint8ClampedArray | null = null;
let scale = 4;

const controller = new AnnotationController(api, {
  render: draw,
  frameChanged: loadImage,
  toast: showToast,
});

function showToast(message: string): void {
  toastBox.textContent = message;
  toastBox.classList.add('visible');
  setTimeout(() => toastBox.classList.remove('visible'), 2500);
}

function loadImage(frame: number): void {
  const image = new Image();
  image.onload = () => {
    const w = image.naturalWidth;
    const h = image.naturalHeight;
    scale = Math.max(1, Math.floor(Math.min(960 / w, 540 / h)));
    canvas.width = w;
    canvas.height = h;
    canvas.style.width = `${w * scale}px`;
    canvas.style.height = `${h * scale}px`;
    ctx.drawImage(image, 0, 0);
    baseImage = ctx.getImageData(0, 0, w, h).data;
    draw();
  };
  image.src = api.frameImageUrl(frame);
}

function draw(): void {
  renderPalette();
  renderProgress();
  if (!baseImage || !controller.frame) {
    if (controller.state.done) {
      progressBox.insertAdjacentHTML(
        'beforeend',
        '<div class="done">corpus complete: nothing left above the threshold</div>',
      );
    }
    return;
  }
  const { width, height, patches } = controller.frame;
  const composited = compositeOverlay(
    baseImage,
    width,
    height,
    patches,
    paletteMap(controller.classes),
    controller.state.overlayOpacity,
    controller.state.hoveredPatch,
  );
  const imageData = ctx.createImageData(width, height);
  imageData.data.set(composited);
  ctx.putImageData(imageData, 0, 0);
  gaugeFill.style.width = `${(controller.state.coverageGauge * 100).toFixed(1)}%`;
  gauge.title = `${(controller.state.coverageGauge * 100).toFixed(1)}% covered`;
}

function renderPalette(): void {
  const entries = labelableClasses(controller.classes);
  paletteBox.innerHTML = '';
  entries.forEach((cls, i) => {
    const button = document.createElement('button');
    const digit = i < 9 ? `${i + 1}` : i === 9 ? '0' : '';
    button.className = 'swatch' + (cls.id === controller.state.selectedClass ? ' selected' : '');
    button.innerHTML =
      `<span class="chip" style="background: rgb(${cls.color.join(',')})"></span>` +
      `<span class="name">${cls.name}</span><span class="digit">${digit}</span>`;
    button.onclick = () => controller.selectClass(cls.id);
    paletteBox.appendChild(button);
  });
}

function renderProgress(): void {
  const p = controller.progress;
  progressBox.innerHTML =
    `<div>frame <b>${controller.state.currentFrame ?? '-'}</b></div>` +
    `<div>clicks <b>${p.clicks}</b></div>` +
    `<div>frames presented <b>${p.presented}</b></div>` +
    `<div>corpus density <b>${(p.density * 100).toFixed(2)}%</b></div>` +
    `<div>rules <b>${p.rules}</b></div>`;
}

function canvasPixel(event: MouseEvent): { x: number; y: number } {
  const rect = canvas.getBoundingClientRect();
  return {
    x: Math.floor(((event.clientX - rect.left) / rect.width) * canvas.width),
    y: Math.floor(((event.clientY - rect.top) / rect.height) * canvas.height),
  };
}

canvas.addEventListener('mousemove', (event) => {
  const { x, y } = canvasPixel(event);
  controller.hover(x, y);
});

canvas.addEventListener('click', (event) => {
  const { x, y } = canvasPixel(event);
  void controller.clickPixel(x, y);
});

document.addEventListener('keydown', (event) => {
  if (event.key >= '0' && event.key <= '9') {
    const cls = classForDigit(controller.classes, Number(event.key));
    if (cls) controller.selectClass(cls.id);
  } else if (event.key === 'z' && (event.ctrlKey || event.metaKey)) {
    event.preventDefault();
    void controller.undoLast();
  }
});

opacitySlider.addEventListener('input', () => {
  controller.state.overlayOpacity = Number(opacitySlider.value) / 100;
  draw();
});

void controller.start();
