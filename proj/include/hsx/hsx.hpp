#pragma once

#include "hsx/baselines/justoliu.hpp"
#include "hsx/baselines/minirocket.hpp"
#include "hsx/bench/benchmark.hpp"
#include "hsx/bench/experiment.hpp"
#include "hsx/bench/plot.hpp"
#include "hsx/bench/suite.hpp"
#include "hsx/bench/table.hpp"
#include "hsx/data/cube.hpp"
#include "hsx/data/feature_cache.hpp"
#include "hsx/data/manifest.hpp"
#include "hsx/data/synthetic.hpp"
#include "hsx/encoder/checkpoint.hpp"
#include "hsx/encoder/encoder.hpp"
#include "hsx/encoder/pretrain.hpp"
#include "hsx/heads/fc.hpp"
#include "hsx/heads/train.hpp"
#include "hsx/heads/unet.hpp"
#include "hsx/metrics/confusion.hpp"
#include "hsx/modality/prgb.hpp"
#include "hsx/tensor/gradcheck.hpp"
