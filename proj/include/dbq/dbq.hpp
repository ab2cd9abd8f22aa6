#pragma once

#include "dbq/biquad.hpp"
#include "dbq/dataset.hpp"
#include "dbq/dual.hpp"
#include "dbq/error.hpp"
#include "dbq/fft.hpp"
#include "dbq/hypernet.hpp"
#include "dbq/model.hpp"
#include "dbq/representation.hpp"
#include "dbq/serialize.hpp"
#include "dbq/train.hpp"
#include "dbq/wav.hpp"
