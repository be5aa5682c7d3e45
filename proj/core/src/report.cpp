#include "fkt/report.hpp"

#include <fstream>
#include <sstream>

namespace fkt {

std::string report_jsonl(const TrainReport& report, bool include_timing) {
  std::ostringstream out;
  for (const EpochRecord& rec : report.epochs) {
    out << "{\"epoch\":" << rec.epoch;
    out << ",\"m_s\":" << format_double(rec.m_s);
    out << ",\"m_c\":" << format_double(rec.m_c);
    out << ",\"m_d\":" << format_double(rec.m_d);
    out << ",\"objective\":" << format_double(rec.objective);
    const MetricsReport& m = rec.metrics;
    out << ",\"a_f\":" << (m.present && m.has_minority ? format_double(m.a_f) : "null");
    out << ",\"a_m\":" << (m.present && m.has_majority ? format_double(m.a_m) : "null");
    out << ",\"a_o\":" << (m.present ? format_double(m.a_o) : "null");
    out << ",\"wall_ms\":" << (include_timing ? rec.wall_ms : 0);
    out << "}\n";
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("io", "write failed for '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace fkt
