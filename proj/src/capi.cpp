#include "plateobs/plateobs.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "json.hpp"
#include "plateobs/errors.hpp"
#include "plateobs/green_series.hpp"
#include "plateobs/run.hpp"

struct plateobs_series {
  plateobs::SeriesState state;
};

struct plateobs_config {
  plateobs::RunConfig config;
};

namespace {

thread_local std::string g_last_error;

plateobs_status fail(plateobs_status code, const char* what) {
  g_last_error = what;
  return code;
}

template <class F>
plateobs_status guarded(F&& fn) {
  try {
    g_last_error.clear();
    fn();
    return PLATEOBS_OK;
  } catch (const plateobs::DomainError& e) {
    return fail(PLATEOBS_DOMAIN, e.what());
  } catch (const plateobs::ValidationError& e) {
    return fail(PLATEOBS_VALIDATION, e.what());
  } catch (const plateobs::UnsupportedError& e) {
    return fail(PLATEOBS_UNSUPPORTED, e.what());
  } catch (const plateobs::IterationLimitError& e) {
    return fail(PLATEOBS_ITERATION_LIMIT, e.what());
  } catch (const plateobs::AssemblyError& e) {
    return fail(PLATEOBS_SINGULAR, e.what());
  } catch (const plateobs::IoError& e) {
    return fail(PLATEOBS_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PLATEOBS_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PLATEOBS_INTERNAL, e.what());
  } catch (...) {
    return fail(PLATEOBS_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* name) {
  if (!p) throw plateobs::ValidationError(std::string(name) + " is null");
}

}  // namespace

extern "C" {

const char* plateobs_version(void) { return "1.0.0"; }

const char* plateobs_last_error(void) { return g_last_error.c_str(); }

void plateobs_string_free(char* s) { delete[] s; }

plateobs_status plateobs_series_create(double sigma, double half_width, int m_max, plateobs_series** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    if (m_max < 1) throw plateobs::ValidationError("m_max must be positive");
    *out = new plateobs_series{plateobs::SeriesState({sigma, half_width}, m_max)};
  });
}

void plateobs_series_destroy(plateobs_series* series) { delete series; }

plateobs_status plateobs_series_tail_bound(const plateobs_series* series, double* out) {
  return guarded([&] {
    require(series, "series");
    require(out, "out");
    *out = series->state.tail_bound();
  });
}

plateobs_status plateobs_green_value(const plateobs_series* series, double xi, double eta, double x, double y,
                                     double* out) {
  return guarded([&] {
    require(series, "series");
    require(out, "out");
    *out = plateobs::green_value({xi, eta}, {x, y}, series->state);
  });
}

plateobs_status plateobs_antisym_value(const plateobs_series* series, double xi, double eta, double x, double y,
                                       double* out) {
  return guarded([&] {
    require(series, "series");
    require(out, "out");
    *out = plateobs::antisym_solution({xi, eta}, {x, y}, series->state);
  });
}

plateobs_status plateobs_threshold_M(double sigma, double half_width, int m_max, double* value, double* tail_bound) {
  return guarded([&] {
    require(value, "value");
    if (m_max < 1) throw plateobs::ValidationError("m_max must be positive");
    const plateobs::ThresholdValue t = plateobs::gap_threshold_M({sigma, half_width}, m_max);
    *value = t.value;
    if (tail_bound) *tail_bound = t.tail_bound;
  });
}

plateobs_status plateobs_config_parse(const char* json_text, plateobs_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    *out = nullptr;
    *out = new plateobs_config{plateobs::RunConfig::parse(json_text)};
  });
}

void plateobs_config_destroy(plateobs_config* config) { delete config; }

plateobs_status plateobs_config_apply(plateobs_config* config, const plateobs_overrides* overrides) {
  return guarded([&] {
    require(config, "config");
    require(overrides, "overrides");
    plateobs::RunOverrides o;
    if (overrides->problem) o.problem = overrides->problem;
    if (overrides->output_dir) o.output_dir = overrides->output_dir;
    o.threads = overrides->threads;
    o.m_max = overrides->m_max;
    o.nx = overrides->nx;
    o.ny = overrides->ny;
    config->config.apply(o);
  });
}

plateobs_status plateobs_config_validate(const plateobs_config* config, char** diagnostics_json) {
  return guarded([&] {
    require(config, "config");
    require(diagnostics_json, "diagnostics_json");
    *diagnostics_json = copy_string(nlohmann::json(config->config.validate()).dump());
  });
}

plateobs_status plateobs_config_run(const plateobs_config* config, char** summary_json) {
  return guarded([&] {
    require(config, "config");
    require(summary_json, "summary_json");
    *summary_json = nullptr;
    *summary_json = copy_string(plateobs::run(config->config).summary_json);
  });
}

}  // extern "C"
