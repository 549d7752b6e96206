#ifndef STREETLIGHT_STREETLIGHT_HPP
#define STREETLIGHT_STREETLIGHT_HPP

#include "mode.hpp"
#include "time.hpp"
#include "solar.hpp"
#include "solar_fetch.hpp"
#include "command.hpp"
#include "power.hpp"
#include "modem.hpp"
#include "fake_modem.hpp"
#include "controller.hpp"
#include "zone.hpp"
#include "json_io.hpp"
#include "report.hpp"
#include "service.hpp"

#endif
