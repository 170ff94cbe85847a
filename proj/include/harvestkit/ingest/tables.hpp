#pragma once

#include <string_view>

namespace harvestkit::ingest::tables {

// Raw contents of the shipped lookup tables (tab-separated, '#' comments).
extern const std::string_view kDcmiTypesTsv;
extern const std::string_view kIso639Tsv;

}  // namespace harvestkit::ingest::tables
