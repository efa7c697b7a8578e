#pragma once

#include "nsc/data/case.hpp"
#include "nsc/data/generator.hpp"
#include "nsc/data/io.hpp"
#include "nsc/error.hpp"
#include "nsc/eval/baseline.hpp"
#include "nsc/eval/evaluate.hpp"
#include "nsc/eval/metrics.hpp"
#include "nsc/inference/episode.hpp"
#include "nsc/inference/uncertainty.hpp"
#include "nsc/model/bundle.hpp"
#include "nsc/model/checkpoint.hpp"
#include "nsc/model/coupling.hpp"
#include "nsc/model/known_state.hpp"
#include "nsc/model/losses.hpp"
#include "nsc/model/vocabulary.hpp"
#include "nsc/numkit/layers.hpp"
#include "nsc/numkit/optimizer.hpp"
#include "nsc/numkit/random.hpp"
#include "nsc/numkit/tensor.hpp"
#include "nsc/train/config.hpp"
#include "nsc/train/trainer.hpp"
