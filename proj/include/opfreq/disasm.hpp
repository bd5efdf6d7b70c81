#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace opfreq {

/// Mnemonics of one executable's disassembly, in listing order.
struct opcode_sequence {
    std::string source_id;
    std::vector<std::string> opcodes;

    bool operator==(const opcode_sequence&) const = default;
};

/// Corpus-wide vocabulary. Entries are unique and sorted; an entry's id is its position.
class master_opcode_list {
  public:
    master_opcode_list() = default;

    /// Throws error(parse_error) unless `entries` is strictly increasing and free of
    /// empty or whitespace-bearing mnemonics.
    explicit master_opcode_list(std::vector<std::string> entries);

    const std::vector<std::string>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    std::optional<std::size_t> id_of(std::string_view mnemonic) const;

    bool operator==(const master_opcode_list&) const = default;

  private:
    std::vector<std::string> entries_;
};

struct opcode_histogram {
    std::string source_id;
    std::vector<std::uint64_t> counts; // master-list order
    std::uint64_t unseen_count = 0;    // mnemonics not in the master list
};

/// Extracts mnemonics from a GNU objdump `-d` listing.
///
/// Instruction lines look like `  401000:\t55                   \tpush   %ebp`.
/// Label lines, section and file headers, blank lines, `...` elisions, and
/// bytes-only continuation lines are skipped, as are `(bad)` decode markers.
/// The first token of the mnemonic field is taken, so a prefix such as `lock`
/// or `rep` counts as the opcode. Listings produced with --no-show-raw-insn
/// (no bytes column) are accepted too.
///
/// Throws error(malformed_line) for a line that has an `address:` prefix but
/// neither a mnemonic nor a byte column.
opcode_sequence parse_disassembly(std::string_view text, std::string source_id);

master_opcode_list build_master_list(std::span<const opcode_sequence> sequences);

/// Throws error(empty_master) when the master list is empty.
opcode_histogram histogram(const opcode_sequence& seq, const master_opcode_list& master);

void write_master_list(std::ostream& out, const master_opcode_list& master);
master_opcode_list read_master_list(std::istream& in);

struct labeled_sequence {
    opcode_sequence sequence;
    int label = 0; // 1 = malware, 0 = benign
};

/// Parses every regular file of both directories (sorted by file name). Source ids are
/// `malware/<file>` and `benign/<file>`. Throws error(input_not_found) for a missing directory.
std::vector<labeled_sequence> ingest_listing_dirs(const std::filesystem::path& malware_dir,
                                                  const std::filesystem::path& benign_dir);

} // namespace opfreq
