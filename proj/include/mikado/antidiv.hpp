#pragma once

#include "mikado/spectral.hpp"

namespace mikado {

// Order -1 anti-divergence: symmetric, trace-free, Div R f = f - mean(f).
SpectralField antidiv(const SpectralField& f);

// Bilinear anti-divergence B(f, X): mean-free part of Div B(f,X) equals X^T f.
// X must have zero mean. Products use the given padding factor.
SpectralField bilinear_antidiv(const SpectralField& f, const SpectralField& X, int padding = 2);

}  // namespace mikado
