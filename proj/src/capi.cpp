#include "icepred/icepred.h"

#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "icepred/config.hpp"
#include "icepred/errors.hpp"
#include "icepred/pipeline.hpp"

struct icepred_config {
  icepred::RunConfig cfg;
};

struct icepred_pipeline {
  std::unique_ptr<icepred::Pipeline> pipeline;
};

namespace {

thread_local std::string last_error;

icepred_status status_of(icepred::ErrorKind kind) {
  using icepred::ErrorKind;
  switch (kind) {
    case ErrorKind::invalid_argument: return ICEPRED_ERR_INVALID_ARGUMENT;
    case ErrorKind::config: return ICEPRED_ERR_CONFIG;
    case ErrorKind::io: return ICEPRED_ERR_IO;
    case ErrorKind::missing_artifact: return ICEPRED_ERR_MISSING_ARTIFACT;
    case ErrorKind::geometry: return ICEPRED_ERR_GEOMETRY;
    case ErrorKind::numeric: return ICEPRED_ERR_NUMERIC;
    case ErrorKind::solver: return ICEPRED_ERR_SOLVER;
    case ErrorKind::nonconvergence: return ICEPRED_ERR_NONCONVERGENCE;
    default: return ICEPRED_ERR_INTERNAL;
  }
}

template <class F>
icepred_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return ICEPRED_OK;
  } catch (const icepred::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return ICEPRED_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return ICEPRED_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw icepred::InvalidArgument(std::string(what) + " must not be NULL");
}

icepred_status copy_out(const std::string& s, char* buf, size_t len, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf || len < s.size() + 1) {
    if (buf && len > 0) buf[0] = '\0';
    last_error = "buffer too small";
    return ICEPRED_ERR_INVALID_ARGUMENT;
  }
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return ICEPRED_OK;
}

}  // namespace

extern "C" {

const char* icepred_version(void) { return "1.0.0"; }

const char* icepred_status_name(icepred_status status) {
  switch (status) {
    case ICEPRED_OK: return "ok";
    case ICEPRED_ERR_INVALID_ARGUMENT: return "invalid argument";
    case ICEPRED_ERR_CONFIG: return "configuration error";
    case ICEPRED_ERR_IO: return "i/o error";
    case ICEPRED_ERR_MISSING_ARTIFACT: return "missing artifact";
    case ICEPRED_ERR_GEOMETRY: return "geometry error";
    case ICEPRED_ERR_NUMERIC: return "numerical error";
    case ICEPRED_ERR_SOLVER: return "solver error";
    case ICEPRED_ERR_NONCONVERGENCE: return "nonconvergence";
    case ICEPRED_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* icepred_last_error(void) { return last_error.c_str(); }

icepred_status icepred_config_default(icepred_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new icepred_config{icepred::RunConfig::defaults()};
  });
}

icepred_status icepred_config_load(const char* path, icepred_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto cfg = path ? icepred::load_config(path) : icepred::RunConfig::defaults();
    *out = new icepred_config{std::move(cfg)};
  });
}

icepred_status icepred_config_parse(const char* json_text, icepred_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto cfg = json_text ? icepred::parse_config(json_text) : icepred::RunConfig::defaults();
    *out = new icepred_config{std::move(cfg)};
  });
}

void icepred_config_free(icepred_config* cfg) { delete cfg; }

icepred_status icepred_config_set_seed(icepred_config* cfg, uint64_t seed) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->cfg.seed = seed;
  });
}

icepred_status icepred_config_set_threads(icepred_config* cfg, int threads) {
  return guarded([&] {
    require(cfg, "cfg");
    if (threads < 1) throw icepred::InvalidArgument("threads must be >= 1");
    cfg->cfg.threads = threads;
    cfg->cfg.gevd.threads = threads;
  });
}

icepred_status icepred_config_set_output_dir(icepred_config* cfg, const char* dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(dir, "dir");
    if (!*dir) throw icepred::InvalidArgument("output directory must be nonempty");
    cfg->cfg.output_dir = dir;
  });
}

icepred_status icepred_config_serialize(const icepred_config* cfg, char* buf, size_t len, size_t* needed) {
  std::string text;
  const icepred_status st = guarded([&] {
    require(cfg, "cfg");
    text = icepred::serialize_config(cfg->cfg);
  });
  return st == ICEPRED_OK ? copy_out(text, buf, len, needed) : st;
}

icepred_status icepred_pipeline_create(const icepred_config* cfg, icepred_log_fn log, void* user,
                                       icepred_pipeline** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = nullptr;
    icepred::LogSink sink;
    if (log) sink = [log, user](const std::string& line) { log(line.c_str(), user); };
    *out = new icepred_pipeline{std::make_unique<icepred::Pipeline>(cfg->cfg, std::move(sink))};
  });
}

void icepred_pipeline_free(icepred_pipeline* p) { delete p; }

icepred_status icepred_pipeline_run(icepred_pipeline* p, const char* stage) {
  return guarded([&] {
    require(p, "pipeline");
    require(stage, "stage");
    p->pipeline->run(icepred::stage_from_string(stage));
  });
}

icepred_status icepred_pipeline_record_value(const icepred_pipeline* p, const char* key, char* buf, size_t len,
                                             size_t* needed) {
  std::string value;
  const icepred_status st = guarded([&] {
    require(p, "pipeline");
    require(key, "key");
    icepred::RunRecord rec;
    rec.load(p->pipeline->output_dir() / "record.txt");
    value = rec.get(key);
    if (value.empty()) throw icepred::MissingArtifactError(std::string("no record entry '") + key + "'");
  });
  return st == ICEPRED_OK ? copy_out(value, buf, len, needed) : st;
}

}  // extern "C"
