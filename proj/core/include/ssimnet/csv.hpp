#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ssimnet/error.hpp"
#include "ssimnet/textio.hpp"

namespace ssimnet {

// Minimal CSV emitter: "#"-prefixed comment lines, then a header row,
// then data rows. Doubles are written in shortest round-trip form so
// identical runs produce identical bytes.
class CsvWriter {
  public:
    explicit CsvWriter(const std::filesystem::path& path) : path_(path), out_(path) {
        if (!out_) throw data_error("cannot write " + path.string());
    }

    void comment(const std::string& text) { out_ << "# " << text << "\n"; }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

    void flush() {
        out_.flush();
        if (!out_) throw data_error("failed writing " + path_.string());
    }

  private:
    std::filesystem::path path_;
    std::ofstream out_;
};

}  // namespace ssimnet
