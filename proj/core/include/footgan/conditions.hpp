#pragma once

#include <array>
#include <string>

namespace footgan {

/// Eight synthesis methods plus the real recordings, in presentation order.
inline const std::array<std::string, 9> kConditions = {"PM1", "PM2", "PM3", "SPS", "STAT",
                                                       "ADD", "WAVE", "HIFI", "REAL"};

bool is_known_condition(const std::string& name);

}  // namespace footgan
