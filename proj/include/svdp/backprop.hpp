#pragma once

#include <optional>

#include "svdp/errors.hpp"
#include "svdp/model.hpp"
#include "svdp/prompts.hpp"

namespace svdp {

/// A forward pass together with the warp it consumed, if any.
template <typename T>
struct PromptedPass {
  PredictionOutput<T> output;
  ForwardTrace<T> trace;
  std::optional<WarpedImage<T>> warped;  // empty for a pass on the raw image
};

template <typename T>
struct PromptedGradients {
  ParamSet<T> params;
  PromptGradient<T> prompts;
};

/// Deterministic forward through warp(image, prompts).
template <typename T>
PromptedPass<T> forward_prompted(const Network<T>& net, const ParamSet<T>& params,
                                 const Tensor3<T>& image, const PromptState<T>& prompts) {
  PromptedPass<T> pass;
  pass.warped = warp_traced(image, prompts);
  pass.output = net.forward(params, pass.warped->image, false, 0, pass.trace);
  return pass;
}

/// Deterministic forward on the raw image; prompt gradients are unavailable.
template <typename T>
PromptedPass<T> forward_unprompted(const Network<T>& net, const ParamSet<T>& params,
                                   const Tensor3<T>& image) {
  PromptedPass<T> pass;
  pass.output = net.forward(params, image, false, 0, pass.trace);
  return pass;
}

/// Gradients of a loss (given as d loss / d output) for every parameter and every
/// active prompt entry. Inactive entries get no gradient at all. Raises
/// DetachedPromptError when the pass never went through a warp.
template <typename T>
PromptedGradients<T> backward(const Network<T>& net, const ParamSet<T>& params,
                              const PromptedPass<T>& pass, const Tensor3<T>& grad_output) {
  if (!pass.warped) throw DetachedPromptError();
  auto g = net.backward(params, pass.trace, grad_output, true);
  return {std::move(g.params), prompt_gradient(*pass.warped, g.input)};
}

}  // namespace svdp
