#pragma once

#include "svdp/adaptation.hpp"
#include "svdp/backprop.hpp"
#include "svdp/benchmark.hpp"
#include "svdp/checkpoint.hpp"
#include "svdp/config.hpp"
#include "svdp/errors.hpp"
#include "svdp/experiments.hpp"
#include "svdp/io/corpus.hpp"
#include "svdp/io/hash.hpp"
#include "svdp/io/png.hpp"
#include "svdp/loss.hpp"
#include "svdp/metrics.hpp"
#include "svdp/model.hpp"
#include "svdp/optimizer.hpp"
#include "svdp/params.hpp"
#include "svdp/placement.hpp"
#include "svdp/pretrain.hpp"
#include "svdp/prompts.hpp"
#include "svdp/pseudo_labels.hpp"
#include "svdp/random.hpp"
#include "svdp/report.hpp"
#include "svdp/resample.hpp"
#include "svdp/tensor.hpp"
#include "svdp/uncertainty.hpp"
#include "svdp/updating.hpp"
