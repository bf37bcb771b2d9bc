#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "cpd/mesh.hpp"

namespace cpd::test {

// n x n quads on [0, size]^2, each split along the (i, j) -> (i+1, j+1) diagonal.
inline TriangleMesh grid_mesh(int n, double size = 1.0) {
    Vertices V((n + 1) * (n + 1), 3);
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) V.row(j * (n + 1) + i) << size * i / n, size * j / n, 0.0;
    Faces F(2 * n * n, 3);
    int f = 0;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const int a = j * (n + 1) + i, b = a + 1, c = a + n + 2, d = a + n + 1;
            F.row(f++) << a, b, c;
            F.row(f++) << a, c, d;
        }
    return TriangleMesh::from_arrays(std::move(V), std::move(F));
}

inline int grid_index(int n, int i, int j) { return j * (n + 1) + i; }

inline TriangleMesh from_string(const std::string& text, MeshFormat format) {
    std::istringstream in(text);
    return load_mesh(in, format);
}

// Same surface with vertex indices shuffled.
inline TriangleMesh permuted(const TriangleMesh& m, unsigned seed) {
    std::vector<int> p(m.vertex_count());
    std::iota(p.begin(), p.end(), 0);
    std::mt19937 rng(seed);
    std::shuffle(p.begin(), p.end(), rng);
    Vertices V(m.vertex_count(), 3);
    for (int i = 0; i < m.vertex_count(); ++i) V.row(p[i]) = m.vertices().row(i);
    Faces F = m.faces();
    for (Eigen::Index f = 0; f < F.rows(); ++f)
        for (int k = 0; k < 3; ++k) F(f, k) = p[F(f, k)];
    return TriangleMesh::from_arrays(std::move(V), std::move(F));
}

}  // namespace cpd::test
