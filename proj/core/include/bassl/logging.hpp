#pragma once

#include <string>

namespace bassl::logging {

enum class Level { error = 0, info = 1, debug = 2 };

// Threshold comes from BASSL_LOG={error,info,debug}; default info.
Level threshold();
void set_threshold(Level lvl);

void error(const std::string& msg);
void warn(const std::string& msg);  // emitted at the error threshold, prefixed "warning:"
void info(const std::string& msg);
void debug(const std::string& msg);

}  // namespace bassl::logging
