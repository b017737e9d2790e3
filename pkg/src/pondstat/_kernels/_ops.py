"""Opcode table for the compiled expression programs.

Transform expressions are compiled to a flat postfix program (pairs of
int32 ``(opcode, arg)``); both kernel implementations execute the same
encoding, so the numbers here are part of the kernel ABI.
"""

OP_CONST = 0   # arg = index into the constant pool
OP_X = 1
OP_NEG = 2
OP_ADD = 3
OP_SUB = 4
OP_MUL = 5
OP_DIV = 6
OP_POW = 7
OP_LT = 8
OP_LE = 9
OP_GT = 10
OP_GE = 11
OP_EQ = 12
OP_NE = 13
OP_LOG = 14
OP_LOG1P = 15
OP_EXP = 16
OP_ABS = 17
OP_SIGN = 18
OP_FLOOR = 19
OP_CEIL = 20
OP_SQRT = 21
OP_MIN = 22
OP_MAX = 23
OP_IF = 24

UNARY_OPS = {OP_NEG, OP_LOG, OP_LOG1P, OP_EXP, OP_ABS, OP_SIGN, OP_FLOOR, OP_CEIL, OP_SQRT}
BINARY_OPS = {OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_LT, OP_LE, OP_GT, OP_GE,
              OP_EQ, OP_NE, OP_MIN, OP_MAX}
