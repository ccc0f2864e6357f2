#pragma once

#include "subrad/error.hpp"
#include "subrad/hilbert.hpp"
#include "subrad/model.hpp"
#include "subrad/dynamics.hpp"
#include "subrad/perturb.hpp"
#include "subrad/fields.hpp"
#include "subrad/protocol.hpp"
#include "subrad/config.hpp"
#include "subrad/commands.hpp"
