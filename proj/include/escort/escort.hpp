#ifndef ESCORT_ESCORT_HPP
#define ESCORT_ESCORT_HPP

#include "escort/access_model.hpp"
#include "escort/config.hpp"
#include "escort/conv.hpp"
#include "escort/csr.hpp"
#include "escort/engine.hpp"
#include "escort/tensor.hpp"
#include "escort/weight_io.hpp"

#endif  // ESCORT_ESCORT_HPP
