#pragma once

#include <cstdint>

namespace increcon::meshing_detail {

// Standard marching-cubes tables (Lorensen-Cline via P. Bourke's layout).
// Corner v of cube base (i,j,k):
//   0:(i,j,k) 1:(i+1,j,k) 2:(i+1,j+1,k) 3:(i,j+1,k)
//   4:(i,j,k+1) 5:(i+1,j,k+1) 6:(i+1,j+1,k+1) 7:(i,j+1,k+1)
// Edge e connects corners kEdgeCorners[e].

inline constexpr int kEdgeCorners[12][2] = {
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
};

inline constexpr int kCornerOffsets[8][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
    {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
};

extern const uint16_t kEdgeTable[256];
extern const int8_t kTriTable[256][16];

}  // namespace increcon::meshing_detail
