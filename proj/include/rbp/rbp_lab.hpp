#pragma once

// Umbrella header for the whole library.

#include "rbp/adam.hpp"
#include "rbp/autodiff.hpp"
#include "rbp/checkpoint.hpp"
#include "rbp/corpus.hpp"
#include "rbp/dataset.hpp"
#include "rbp/encoding.hpp"
#include "rbp/gradcheck.hpp"
#include "rbp/gradcheck_graphs.hpp"
#include "rbp/harness.hpp"
#include "rbp/log.hpp"
#include "rbp/model.hpp"
#include "rbp/patterns.hpp"
#include "rbp/rbp.hpp"
#include "rbp/tasks.hpp"
#include "rbp/tensor.hpp"
