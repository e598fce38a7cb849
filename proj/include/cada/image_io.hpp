#pragma once

#include <string>

#include "cada/tensor.hpp"

namespace cada {

// 8-bit binary PGM (P5) and PPM (P6). Values map linearly: byte v <-> v/255;
// saving quantizes with round(clamp(x,0,1)*255), so a round trip is within
// 1/510 per pixel.

// Returns [1,H,W]. For P6, take_green selects channel 1; otherwise channels
// are averaged. Malformed files raise DataError with byte offsets.
Tensor load_image(const std::string& path, bool take_green = true);

// Returns [3,H,W] from a P6 file (P5 loads as replicated gray).
Tensor load_image_rgb(const std::string& path);

// img: [1,H,W] or [H,W].
void save_pgm(const std::string& path, const Tensor& img);
// rgb: [3,H,W].
void save_ppm(const std::string& path, const Tensor& rgb);

}  // namespace cada
