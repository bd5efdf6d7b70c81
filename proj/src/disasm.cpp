#include "opfreq/disasm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "opfreq/error.hpp"

namespace opfreq {
namespace {

bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

std::string_view first_token(std::string_view s) {
    s = trim(s);
    auto end = std::ranges::find_if(s, is_space);
    return s.substr(0, static_cast<std::size_t>(end - s.begin()));
}

// "55 89 e5" or ARM-style "e92d4800": space separated runs of an even number of hex digits.
bool is_byte_column(std::string_view field) {
    field = trim(field);
    std::size_t run = 0;
    for (char c : field) {
        if (c == ' ') {
            if (run % 2 != 0) {
                return false;
            }
            run = 0;
        } else if (is_hex(c)) {
            ++run;
        } else {
            return false;
        }
    }
    return run % 2 == 0;
}

std::vector<std::string_view> split_tabs(std::string_view s) {
    std::vector<std::string_view> fields;
    for (;;) {
        auto pos = s.find('\t');
        fields.push_back(s.substr(0, pos));
        if (pos == std::string_view::npos) {
            return fields;
        }
        s.remove_prefix(pos + 1);
    }
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

[[noreturn]] void malformed(const std::string& source_id, std::size_t line_no, std::string_view line) {
    throw error(errc::malformed_line,
                source_id + ":" + std::to_string(line_no) + ": '" + std::string(line) + "'");
}

} // namespace

master_opcode_list::master_opcode_list(std::vector<std::string> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.empty() || std::ranges::any_of(e, is_space)) {
            throw error(errc::parse_error, "invalid mnemonic in master list: '" + e + "'");
        }
        if (i > 0 && !(entries_[i - 1] < e)) {
            throw error(errc::parse_error, "master list not sorted/unique at '" + e + "'");
        }
    }
}

std::optional<std::size_t> master_opcode_list::id_of(std::string_view mnemonic) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), mnemonic,
                               [](const std::string& a, std::string_view b) { return std::string_view(a) < b; });
    if (it == entries_.end() || *it != mnemonic) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - entries_.begin());
}

opcode_sequence parse_disassembly(std::string_view text, std::string source_id) {
    opcode_sequence seq{std::move(source_id), {}};
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }

        std::string_view rest = line;
        while (!rest.empty() && (rest.front() == ' ' || rest.front() == '\t')) {
            rest.remove_prefix(1);
        }
        std::size_t hex_len = 0;
        while (hex_len < rest.size() && is_hex(rest[hex_len])) {
            ++hex_len;
        }
        // Anything not shaped "<hex>:" is a label, header, elision, or blank line.
        if (hex_len == 0 || hex_len == rest.size() || rest[hex_len] != ':') {
            continue;
        }
        if (line.find("file format") != std::string_view::npos) {
            continue;
        }
        rest.remove_prefix(hex_len + 1);

        auto fields = split_tabs(rest);
        if (!trim(fields.front()).empty() || fields.size() < 2) {
            malformed(seq.source_id, line_no, line);
        }
        std::string_view mnemonic_field;
        if (is_byte_column(fields[1])) {
            for (std::size_t i = 2; i < fields.size() && mnemonic_field.empty(); ++i) {
                mnemonic_field = trim(fields[i]);
            }
            if (mnemonic_field.empty()) {
                if (trim(fields[1]).empty()) {
                    malformed(seq.source_id, line_no, line);
                }
                continue; // bytes continuation
            }
        } else {
            mnemonic_field = trim(fields[1]);
        }

        auto token = first_token(mnemonic_field);
        if (token == "(bad)") {
            continue;
        }
        seq.opcodes.push_back(lowercase(token));
    }
    return seq;
}

master_opcode_list build_master_list(std::span<const opcode_sequence> sequences) {
    std::set<std::string, std::less<>> unique;
    for (const auto& seq : sequences) {
        unique.insert(seq.opcodes.begin(), seq.opcodes.end());
    }
    return master_opcode_list(std::vector<std::string>(unique.begin(), unique.end()));
}

opcode_histogram histogram(const opcode_sequence& seq, const master_opcode_list& master) {
    if (master.empty()) {
        throw error(errc::empty_master, "cannot build a histogram over an empty master list");
    }
    opcode_histogram h{seq.source_id, std::vector<std::uint64_t>(master.size(), 0), 0};
    for (const auto& op : seq.opcodes) {
        if (auto id = master.id_of(op)) {
            ++h.counts[*id];
        } else {
            ++h.unseen_count;
        }
    }
    return h;
}

void write_master_list(std::ostream& out, const master_opcode_list& master) {
    for (const auto& e : master.entries()) {
        out << e << '\n';
    }
}

master_opcode_list read_master_list(std::istream& in) {
    std::vector<std::string> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        entries.push_back(line);
    }
    return master_opcode_list(std::move(entries));
}

std::vector<labeled_sequence> ingest_listing_dirs(const std::filesystem::path& malware_dir,
                                                  const std::filesystem::path& benign_dir) {
    std::vector<labeled_sequence> out;
    for (auto [dir, label, prefix] : {std::tuple{malware_dir, 1, "malware/"}, std::tuple{benign_dir, 0, "benign/"}}) {
        if (!std::filesystem::is_directory(dir)) {
            throw error(errc::input_not_found, "listing directory not found: " + dir.string());
        }
        std::vector<std::filesystem::path> files;
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.is_regular_file()) {
                files.push_back(entry.path());
            }
        }
        std::ranges::sort(files);
        for (const auto& file : files) {
            std::ifstream in(file, std::ios::binary);
            if (!in) {
                throw error(errc::input_not_found, "cannot read " + file.string());
            }
            std::ostringstream buf;
            buf << in.rdbuf();
            out.push_back({parse_disassembly(buf.str(), prefix + file.filename().string()), label});
        }
    }
    return out;
}

} // namespace opfreq
