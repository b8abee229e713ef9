// Umbrella header for the whole library.
#pragma once

#include "absa/checkpoint.hpp"
#include "absa/commands.hpp"
#include "absa/config.hpp"
#include "absa/dataset.hpp"
#include "absa/digest.hpp"
#include "absa/encoder.hpp"
#include "absa/error.hpp"
#include "absa/eval.hpp"
#include "absa/input_repr.hpp"
#include "absa/linalg.hpp"
#include "absa/optim.hpp"
#include "absa/parallel.hpp"
#include "absa/pipeline.hpp"
#include "absa/pretrain.hpp"
#include "absa/rng.hpp"
#include "absa/synthetic.hpp"
#include "absa/tokenizer.hpp"
#include "absa/training.hpp"
#include "absa/transform.hpp"
