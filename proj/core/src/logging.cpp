#include "bassl/logging.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace bassl::logging {

namespace {

Level parse_env() {
  const char* env = std::getenv("BASSL_LOG");
  if (env == nullptr) return Level::info;
  if (std::strcmp(env, "error") == 0) return Level::error;
  if (std::strcmp(env, "debug") == 0) return Level::debug;
  return Level::info;
}

Level g_threshold = parse_env();

void emit(const char* tag, const std::string& msg) {
  std::fprintf(stderr, "%s: %s\n", tag, msg.c_str());
}

}  // namespace

Level threshold() { return g_threshold; }
void set_threshold(Level lvl) { g_threshold = lvl; }

void error(const std::string& msg) {
  emit("error", msg);
}

void warn(const std::string& msg) {
  if (g_threshold >= Level::error) emit("warning", msg);
}

void info(const std::string& msg) {
  if (g_threshold >= Level::info) emit("info", msg);
}

void debug(const std::string& msg) {
  if (g_threshold >= Level::debug) emit("debug", msg);
}

}  // namespace bassl::logging
