int read_slot_checked(int *table, int idx, int len)
{
    if (idx < 0 || idx >= len)
        return -1;
    return table[idx];
}
