#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

namespace colang {

/// Shortest round-trip is not used on purpose; every float is written with
/// 17 significant digits so reruns can be diffed byte for byte.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(const std::string& v);
  void end_row();

  void row(std::initializer_list<double> values);

 private:
  void separator();

  std::ofstream out_;
  std::size_t columns_;
  std::size_t pending_ = 0;
  std::filesystem::path path_;
};

// Minimal reader for files this library wrote: header plus numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace colang
