#pragma once

#include "bosetrap/units.hpp"
#include "bosetrap/twobody.hpp"
#include "bosetrap/cgbasis.hpp"
#include "bosetrap/matelem.hpp"
#include "bosetrap/eigensolve.hpp"
#include "bosetrap/svm.hpp"
#include "bosetrap/observables.hpp"
#include "bosetrap/config.hpp"
#include "bosetrap/reference.hpp"
