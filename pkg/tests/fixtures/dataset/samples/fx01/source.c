int read_slot(int *table, int idx)
{
    return table[idx];
}
