#include "textblend/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace textblend {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(fnv1a(buf.str())));
  return hex;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ostringstream out;
  out << "textblend-checkpoint v1\n";
  out << "kind " << ckpt.kind << "\n";
  out << "meta " << ckpt.meta.dump() << "\n";
  for (const auto& [name, tensor] : ckpt.params) {
    out << "param " << name << " " << tensor.rank();
    for (std::size_t d : tensor.shape()) out << " " << d;
    out << "\n";
    auto data = tensor.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (i) out << " ";
      out << fmt_double(data[i]);
    }
    out << "\n";
  }
  out << "end\n";

  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write " + path);
  file << out.str();
  if (!file) throw IoError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "textblend-checkpoint v1") {
    throw IoError(path + ": not a checkpoint file");
  }
  Checkpoint ckpt;
  if (!std::getline(in, line) || line.rfind("kind ", 0) != 0) {
    throw IoError(path + ": missing kind header");
  }
  ckpt.kind = line.substr(5);
  if (!std::getline(in, line) || line.rfind("meta ", 0) != 0) {
    throw IoError(path + ": missing meta header");
  }
  ckpt.meta = nlohmann::json::parse(line.substr(5), nullptr, false);
  if (ckpt.meta.is_discarded()) throw IoError(path + ": malformed meta json");

  while (std::getline(in, line)) {
    if (line == "end") return ckpt;
    if (line.rfind("param ", 0) != 0) throw IoError(path + ": unexpected line: " + line);
    std::istringstream header(line.substr(6));
    std::string name;
    std::size_t rank = 0;
    header >> name >> rank;
    Shape shape(rank);
    std::size_t count = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      header >> shape[d];
      count *= shape[d];
    }
    if (!header) throw IoError(path + ": malformed param header for " + name);
    if (!std::getline(in, line)) throw IoError(path + ": missing values for " + name);
    std::istringstream values(line);
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (!(values >> data[i])) {
        throw IoError(path + ": short value row for " + name);
      }
    }
    Tensor t = Tensor::from(std::move(shape), std::move(data));
    t.set_requires_grad(true);
    ckpt.params.push_back({std::move(name), std::move(t)});
  }
  throw IoError(path + ": truncated checkpoint (no end marker)");
}

Checkpoint checkpoint_of(const TeacherModel& model) {
  Checkpoint ckpt;
  ckpt.kind = "teacher";
  ckpt.meta = {{"vocab_size", model.embedding.vocab_size},
               {"embedding_dim", model.embedding.dim},
               {"hidden", model.fwd.hidden},
               {"classes", model.classes},
               {"dropout", model.dropout_rate},
               {"pad_id", model.embedding.pad_id}};
  ckpt.params = parameters(model);
  return ckpt;
}

Checkpoint checkpoint_of(const StudentModel& model) {
  Checkpoint ckpt;
  ckpt.kind = "student";
  std::vector<std::size_t> widths;
  for (const auto& bank : model.banks) widths.push_back(bank.width);
  ckpt.meta = {{"vocab_size", model.embedding.vocab_size},
               {"embedding_dim", model.embedding.dim},
               {"filter_widths", widths},
               {"filters_per_width", model.banks.empty() ? 0 : model.banks[0].count},
               {"classes", model.classes},
               {"dropout", model.dropout_rate},
               {"pad_id", model.embedding.pad_id}};
  ckpt.params = parameters(model);
  return ckpt;
}

namespace {

// Copy checkpoint values into freshly built parameters, matching by name.
void fill_from(std::vector<NamedTensor> dest, const Checkpoint& ckpt) {
  if (dest.size() != ckpt.params.size()) {
    throw IoError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                  " parameters, model wants " + std::to_string(dest.size()));
  }
  for (std::size_t i = 0; i < dest.size(); ++i) {
    const auto& src = ckpt.params[i];
    auto& dst = dest[i];
    if (src.name != dst.name) {
      throw IoError("checkpoint parameter \"" + src.name + "\" where \"" + dst.name +
                    "\" was expected");
    }
    if (src.tensor.shape() != dst.tensor.shape()) {
      throw IoError("checkpoint parameter " + src.name + " has shape " +
                    shape_str(src.tensor.shape()) + ", model wants " +
                    shape_str(dst.tensor.shape()));
    }
    auto out = dst.tensor.data();
    auto in = src.tensor.data();
    std::copy(in.begin(), in.end(), out.begin());
  }
}

}  // namespace

TeacherModel teacher_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "teacher") throw IoError("checkpoint kind is not teacher");
  TeacherHyper hyper;
  hyper.vocab_size = ckpt.meta.at("vocab_size").get<std::size_t>();
  hyper.embedding_dim = ckpt.meta.at("embedding_dim").get<std::size_t>();
  hyper.hidden = ckpt.meta.at("hidden").get<std::size_t>();
  hyper.classes = ckpt.meta.at("classes").get<std::size_t>();
  hyper.dropout = ckpt.meta.at("dropout").get<double>();
  std::mt19937_64 rng(0);
  TeacherModel model = make_teacher(hyper, rng);
  fill_from(parameters(model), ckpt);
  return model;
}

StudentModel student_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "student") throw IoError("checkpoint kind is not student");
  StudentHyper hyper;
  hyper.vocab_size = ckpt.meta.at("vocab_size").get<std::size_t>();
  hyper.embedding_dim = ckpt.meta.at("embedding_dim").get<std::size_t>();
  hyper.filter_widths = ckpt.meta.at("filter_widths").get<std::vector<std::size_t>>();
  hyper.filters_per_width = ckpt.meta.at("filters_per_width").get<std::size_t>();
  hyper.classes = ckpt.meta.at("classes").get<std::size_t>();
  hyper.dropout = ckpt.meta.at("dropout").get<double>();
  std::mt19937_64 rng(0);
  StudentModel model = make_student(hyper, rng);
  fill_from(parameters(model), ckpt);
  return model;
}

}  // namespace textblend
