#include "ivy/ivy.h"

#include <cstring>
#include <exception>
#include <functional>
#include <string>

#include "config.hpp"
#include "error.hpp"
#include "pipeline.hpp"

namespace {

thread_local std::string g_last_error;

int guard(const std::function<void()>& fn) {
  try {
    fn();
    g_last_error.clear();
    return 0;
  } catch (const ivy::Error& e) {
    g_last_error = e.what();
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return 1;
  } catch (...) {
    g_last_error = "unknown failure";
    return 1;
  }
}

}  // namespace

extern "C" {

struct ivy_config {
  ivy::Config cfg;
};

ivy_config* ivy_config_new(void) { return new ivy_config(); }

void ivy_config_free(ivy_config* cfg) { delete cfg; }

int ivy_config_load(ivy_config* cfg, const char* path) {
  if (!cfg || !path) {
    g_last_error = "null argument";
    return 2;
  }
  return guard([&] { cfg->cfg.load_file(path); });
}

int ivy_config_set(ivy_config* cfg, const char* assignment) {
  if (!cfg || !assignment) {
    g_last_error = "null argument";
    return 2;
  }
  return guard([&] { cfg->cfg.set(assignment); });
}

int ivy_config_get(const ivy_config* cfg, const char* key, char* buf,
                   size_t buf_size) {
  if (!cfg || !key || !buf) {
    g_last_error = "null argument";
    return 2;
  }
  return guard([&] {
    const std::string& v = cfg->cfg.get_str(key);
    if (v.size() + 1 > buf_size)
      ivy::fail_config("buffer too small for value of '" + std::string(key) +
                       "'");
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

size_t ivy_config_key_count(void) { return ivy::Config::keys().size(); }

int ivy_config_key_info(size_t index, const char** name,
                        const char** def_value, const char** help) {
  const std::vector<ivy::ConfigKey>& keys = ivy::Config::keys();
  if (index >= keys.size()) {
    g_last_error = "config key index out of range";
    return 2;
  }
  if (name) *name = keys[index].name;
  if (def_value) *def_value = keys[index].def;
  if (help) *help = keys[index].help;
  return 0;
}

int ivy_run(const ivy_config* cfg, const char* command) {
  if (!cfg || !command) {
    g_last_error = "null argument";
    return 2;
  }
  return guard([&] { ivy::run_command(command, cfg->cfg); });
}

const char* ivy_last_error(void) { return g_last_error.c_str(); }

const char* ivy_version(void) { return "1.0.0"; }

}  // extern "C"
