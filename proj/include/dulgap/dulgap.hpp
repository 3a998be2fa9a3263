#pragma once

#include "dulgap/checkpoint.hpp"
#include "dulgap/dataset.hpp"
#include "dulgap/error.hpp"
#include "dulgap/gap.hpp"
#include "dulgap/loss.hpp"
#include "dulgap/mlp.hpp"
#include "dulgap/oracle.hpp"
#include "dulgap/trainer.hpp"
#include "dulgap/wireless.hpp"
