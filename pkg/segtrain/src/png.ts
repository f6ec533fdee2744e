import * as fs from 'fs';
import { PNG } from 'pngjs';

export interface GrayImage {
  width: number;
  height: number;
  data: Uint8Array; // row-major, one byte per pixel
}

export function readGrayPng(path: string): GrayImage {
  const png = PNG.sync.read(fs.readFileSync(path));
  const out = new Uint8Array(png.width * png.height);
  for (let i = 0; i < out.length; i++) {
    out[i] = png.data[4 * i]; // pngjs expands to RGBA; gray: R=G=B
  }
  return { width: png.width, height: png.height, data: out };
}

export function writeGrayPng(path: string, image: GrayImage): void {
  const png = new PNG({
    width: image.width,
    height: image.height,
    colorType: 0,
    inputColorType: 0,
    inputHasAlpha: false,
    bitDepth: 8,
  });
  for (let i = 0; i < image.data.length; i++) {
    png.data[4 * i] = image.data[i];
    png.data[4 * i + 1] = image.data[i];
    png.data[4 * i + 2] = image.data[i];
    png.data[4 * i + 3] = 255;
  }
  fs.writeFileSync(path, PNG.sync.write(png, { colorType: 0 }));
}
