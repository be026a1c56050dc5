// Copyright 2026 The STDN Desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "stdn/trace.hpp"

#include <fstream>

#include "binio.hpp"
#include "stdn/errors.hpp"
#include "stdn/ops.hpp"

namespace stdn {

TraceElements TraceElements::zeros(int64_t batch, int64_t image_size) {
  int64_t l = content_size(image_size);
  return {Tensor::zeros({batch, 1, 1, 3}), Tensor::zeros({batch, 1, 1, 3}), Tensor::zeros({batch, l, l, 3}),
          Tensor::zeros({batch, image_size, image_size, 3})};
}

namespace {

void check_elements(const TraceElements& e, const Tensor& img) {
  if (img.rank() != 4 || img.dim(3) != 3 || img.dim(1) != img.dim(2))
    throw DimensionError("trace: image must be [B,N,N,3], got " + shape_str(img.shape()));
  const int64_t b = img.dim(0), n = img.dim(1);
  auto expect = [&](const Tensor& t, const char* name, Shape want) {
    if (!t.defined() || t.shape() != want)
      throw DimensionError(std::string("trace: ") + name + " must be " + shape_str(want) + ", got " +
                           (t.defined() ? shape_str(t.shape()) : std::string("undefined")));
  };
  expect(e.s_color, "s_color", {b, 1, 1, 3});
  expect(e.b, "b", {b, 1, 1, 3});
  expect(e.T, "T", {b, n, n, 3});
  if (e.C.rank() != 4 || e.C.dim(0) != b || e.C.dim(1) != e.C.dim(2) || e.C.dim(3) != 3 || e.C.dim(1) >= n)
    throw DimensionError("trace: C must be [B,L,L,3] with L < N, got " + shape_str(e.C.shape()));
}

}  // namespace

Tensor compose(const TraceElements& elems, const Tensor& img) {
  check_elements(elems, img);
  const int64_t n = img.dim(1);
  Tensor out = mul(elems.s_color, img);
  out = add(out, elems.b);
  out = add(out, resize_bilinear(elems.C, n, n));
  return add(out, elems.T);
}

Tensor reconstruct_live(const Tensor& img, const TraceElements& elems) { return sub(img, compose(elems, img)); }

Tensor synthesize_spoof(const Tensor& live, const LandmarkSet& live_lm, const Tensor& src_trace,
                        const LandmarkSet& src_lm) {
  if (live.rank() != 4 || live.dim(0) != 1 || live.shape() != src_trace.shape())
    throw DimensionError("synthesize_spoof: live and trace must both be [1,N,N,3]");
  return add(live, warp_trace(src_trace, src_lm, live_lm));
}

HardenResult harden(const TraceElements& elems, std::mt19937_64& rng) {
  const int64_t batch = elems.batch();
  std::uniform_int_distribution<int> pick(0, kTraceElementCount - 1);
  HardenResult r;
  std::array<std::vector<double>, kTraceElementCount> keep;
  for (auto& k : keep) k.assign(static_cast<size_t>(batch), 1.0);
  for (int64_t i = 0; i < batch; ++i) {
    int e = pick(rng);
    r.zeroed.push_back(static_cast<TraceElement>(e));
    keep[static_cast<size_t>(e)][static_cast<size_t>(i)] = 0.0;
  }
  auto masked = [&](const Tensor& t, int e) {
    return mul(t, Tensor::from({batch, 1, 1, 1}, keep[static_cast<size_t>(e)]));
  };
  r.elems = {masked(elems.s_color, 0), masked(elems.b, 1), masked(elems.C, 2), masked(elems.T, 3)};
  return r;
}

namespace {

constexpr char kTraceMagic[4] = {'T', 'R', 'E', 'L'};
constexpr char kTags[kTraceElementCount] = {'s', 'b', 'C', 'T'};

void write_record(std::ostream& os, char tag, const Tensor& t) {
  os.write(kTraceMagic, 4);
  binio::put<char>(os, tag);
  binio::put<uint8_t>(os, static_cast<uint8_t>(t.rank()));
  binio::put<uint16_t>(os, 0);
  for (auto d : t.shape()) binio::put<uint32_t>(os, static_cast<uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.values().data()),
           static_cast<std::streamsize>(t.values().size() * sizeof(double)));
}

Tensor read_record(std::istream& is, char want_tag) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string_view(magic, 4) != std::string_view(kTraceMagic, 4))
    throw std::runtime_error("trace file: bad record magic");
  auto tag = binio::get<char>(is);
  if (tag != want_tag) throw std::runtime_error(std::string("trace file: expected element ") + want_tag);
  auto rank = binio::get<uint8_t>(is);
  binio::get<uint16_t>(is);
  Shape shape;
  for (int i = 0; i < rank; ++i) shape.push_back(binio::get<uint32_t>(is));
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw std::runtime_error("trace file: truncated data");
  return Tensor::from(std::move(shape), std::move(v));
}

}  // namespace

void write_trace_elements(const std::string& path, const TraceElements& elems) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  const Tensor* parts[] = {&elems.s_color, &elems.b, &elems.C, &elems.T};
  for (int i = 0; i < kTraceElementCount; ++i) write_record(os, kTags[i], *parts[i]);
  if (!os) throw std::runtime_error("write failed: " + path);
}

TraceElements read_trace_elements(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  TraceElements e;
  e.s_color = read_record(is, 's');
  e.b = read_record(is, 'b');
  e.C = read_record(is, 'C');
  e.T = read_record(is, 'T');
  return e;
}

}  // namespace stdn
