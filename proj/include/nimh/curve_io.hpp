#pragma once

#include <string>

#include "nimh/curve.hpp"
#include "nimh/model.hpp"

namespace nimh {

// Curve CSV. Header `time_s,voltage_mv,current_ma` (the current column only
// when present), then one row per sample with time to microseconds and
// mV / mA to three decimals. Metadata rides in leading `# key=value` comment
// lines (label, load_ma, period_s, duty, temp_c); other comments are
// ignored. Values are millivolts in the file, volts in memory. LF output;
// CRLF input accepted.
std::string format_curve_csv(const DischargeCurve& curve);
DischargeCurve parse_curve_csv(const std::string& text);

// Parameter file: `KEY=value` per line with keys A..F (kParamKeys order),
// `#` comments. Unknown keys are rejected; missing keys stay 0. Values are
// written with enough digits to round-trip bit-exactly.
std::string format_params(const ModelParams& params);
ModelParams parse_params_text(const std::string& text);

// Whole-file helpers; failures surface as ParseError with the path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

DischargeCurve load_curve(const std::string& path);
void save_curve(const std::string& path, const DischargeCurve& curve);
ModelParams load_params(const std::string& path);
void save_params(const std::string& path, const ModelParams& params);

} // namespace nimh
