#pragma once

#include "seqformer/data.hpp"
#include "seqformer/errors.hpp"
#include "seqformer/footprint.hpp"
#include "seqformer/loss.hpp"
#include "seqformer/metrics.hpp"
#include "seqformer/model.hpp"
#include "seqformer/nn.hpp"
#include "seqformer/optim.hpp"
#include "seqformer/parameters.hpp"
#include "seqformer/pipeline.hpp"
#include "seqformer/serialize.hpp"
#include "seqformer/trainer.hpp"
#include "seqformer/window.hpp"
