#pragma once

#include "cfe/adaptation.hpp"
#include "cfe/attack.hpp"
#include "cfe/cipher.hpp"
#include "cfe/clip_io.hpp"
#include "cfe/codec.hpp"
#include "cfe/error.hpp"
#include "cfe/external_codec.hpp"
#include "cfe/geometry.hpp"
#include "cfe/grid.hpp"
#include "cfe/keyschedule.hpp"
#include "cfe/metrics.hpp"
#include "cfe/vtcore.hpp"
#include "cfe/weights.hpp"
