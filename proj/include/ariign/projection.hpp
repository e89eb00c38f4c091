#pragma once

// Modality-specific MLPs mapping raw features into a shared width d.

#include <vector>

#include "ariign/autograd.hpp"
#include "ariign/mlp.hpp"
#include "ariign/rng.hpp"

namespace ariign {

struct ProjectedFeatures {
  std::vector<double> text;    // xi~_u
  std::vector<double> visual;  // xi~_v
  std::vector<double> audio;   // xi~_a
};

struct ProjectionParams {
  MlpParams text;
  MlpParams audio;
  MlpParams visual;
  std::size_t d = 128;
};

// Two layers each (in -> d gelu, d -> d linear), dropout after the hidden
// layer in train mode.
ProjectionParams make_projection(std::size_t dim_text, std::size_t dim_audio,
                                 std::size_t dim_visual, std::size_t d,
                                 double dropout, Rng& rng);

// Single-utterance convenience path (eval-style unless rng given).
ProjectedFeatures project(const ProjectionParams& params,
                          const std::vector<double>& text,
                          const std::vector<double>& visual,
                          const std::vector<double>& audio);

}  // namespace ariign
