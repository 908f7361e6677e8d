#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "textblend/models.hpp"

namespace textblend {

/// Round-trip-exact decimal formatting (%.17g); the basis of every
/// byte-reproducible artifact this project writes.
std::string fmt_double(double v);

std::uint64_t fnv1a(const std::string& bytes);
/// Hex FNV-1a of a file's bytes; used as the teacher-cache fingerprint.
std::string file_fingerprint(const std::string& path);

/// Flat named-parameter checkpoint with a JSON meta line. Text format,
/// version-tagged, stable field order; identical parameters serialize to
/// identical bytes.
struct Checkpoint {
  std::string kind;  // "teacher" | "student"
  nlohmann::json meta;
  std::vector<NamedTensor> params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint checkpoint_of(const TeacherModel& model);
Checkpoint checkpoint_of(const StudentModel& model);

TeacherModel teacher_from_checkpoint(const Checkpoint& ckpt);
StudentModel student_from_checkpoint(const Checkpoint& ckpt);

}  // namespace textblend
