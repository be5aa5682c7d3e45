#pragma once

#include <string>

#include "fkt/trainer.hpp"

namespace fkt {

/// One JSON object per epoch, fixed key order:
/// {"epoch":..,"m_s":..,"m_c":..,"m_d":..,"a_f":..,"a_m":..,"a_o":..,"wall_ms":..}
/// Undefined accuracies serialize as null. With include_timing off, wall_ms
/// is written as 0 so reruns with the same seed produce identical bytes.
std::string report_jsonl(const TrainReport& report, bool include_timing);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace fkt
