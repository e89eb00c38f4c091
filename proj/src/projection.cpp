#include "ariign/projection.hpp"

#include "ariign/errors.hpp"

namespace ariign {

ProjectionParams make_projection(std::size_t dim_text, std::size_t dim_audio,
                                 std::size_t dim_visual, std::size_t d,
                                 double dropout, Rng& rng) {
  ProjectionParams p;
  p.d = d;
  std::vector<Activation> acts = {Activation::Gelu, Activation::Linear};
  p.text = make_mlp({dim_text, d, d}, acts, dropout, rng);
  p.audio = make_mlp({dim_audio, d, d}, acts, dropout, rng);
  p.visual = make_mlp({dim_visual, d, d}, acts, dropout, rng);
  return p;
}

namespace {

std::vector<double> apply_one(const MlpParams& mlp, const std::vector<double>& x) {
  if (x.size() != mlp.input_dim()) throw ShapeError("project: input dim mismatch");
  Matrix in(1, x.size(), std::vector<double>(x));
  Matrix out = mlp_apply(mlp, in);
  return out.storage();
}

}  // namespace

ProjectedFeatures project(const ProjectionParams& params,
                          const std::vector<double>& text,
                          const std::vector<double>& visual,
                          const std::vector<double>& audio) {
  ProjectedFeatures out;
  out.text = apply_one(params.text, text);
  out.visual = apply_one(params.visual, visual);
  out.audio = apply_one(params.audio, audio);
  return out;
}

}  // namespace ariign
