#pragma once

#include "slg/service/server.hpp"
#include "slg/service/session.hpp"
